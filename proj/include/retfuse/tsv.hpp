#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace retfuse {

// Tab-delimited tables with a header row. Nested lists inside a cell are
// semicolon-separated tokens. Doubles are written with "%.17g" so values
// round-trip bit-exactly.
class TsvWriter {
 public:
  TsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t n_cols_;
};

struct TsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const;  // throws DataError if absent
};

TsvTable read_tsv(const std::filesystem::path& path);

std::string fmt_double(double v);
double parse_double(const std::string& s);
std::optional<double> parse_opt_double(const std::string& s);  // "" -> nullopt
std::string fmt_opt_double(const std::optional<double>& v);

std::vector<std::string> split_tokens(const std::string& cell, char sep = ';');
std::string join_tokens(const std::vector<std::string>& tokens, char sep = ';');

}  // namespace retfuse
