#include "retfuse/tsv.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "retfuse/errors.hpp"

namespace retfuse {

TsvWriter::TsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : n_cols_(header.size()) {
  std::filesystem::create_directories(path.parent_path());
  out_.open(path);
  if (!out_) throw DataError("cannot open for writing: " + path.string());
  row(header);
}

void TsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != n_cols_) throw DataError("tsv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << '\t';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::size_t TsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("tsv column not found: " + name);
}

TsvTable read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("missing input file: " + path.string());
  TsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    if (line.empty()) continue;
    if (line.back() == '\t') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        throw DataError("tsv row width mismatch in " + path.string());
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw DataError("empty tsv file: " + path.string());
  return table;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw DataError("invalid number: '" + s + "'");
  return v;
}

std::optional<double> parse_opt_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::string fmt_opt_double(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

std::vector<std::string> split_tokens(const std::string& cell, char sep) {
  std::vector<std::string> tokens;
  if (cell.empty()) return tokens;
  std::string tok;
  std::istringstream st(cell);
  while (std::getline(st, tok, sep)) tokens.push_back(tok);
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens, char sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(sep);
    out += tokens[i];
  }
  return out;
}

}  // namespace retfuse
