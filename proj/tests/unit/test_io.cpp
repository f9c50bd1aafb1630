#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "retfuse/errors.hpp"
#include "retfuse/pgm.hpp"
#include "retfuse/rng.hpp"
#include "retfuse/tsv.hpp"

using namespace retfuse;

namespace {
std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "retfuse_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("tsv round-trips rows and doubles bit-exactly") {
  const auto path = temp_dir() / "table.tsv";
  {
    TsvWriter w(path, {"id", "value", "tags"});
    w.row({"a", fmt_double(0.1), join_tokens({"x", "y"})});
    w.row({"b", fmt_double(-1.5e-300), ""});
    w.row({"c", fmt_double(1.0 / 3.0), join_tokens({"z"})});
  }
  const auto table = read_tsv(path);
  REQUIRE(table.header.size() == 3);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.col("value") == 1);
  CHECK(parse_double(table.rows[0][1]) == 0.1);
  CHECK(parse_double(table.rows[1][1]) == -1.5e-300);
  CHECK(parse_double(table.rows[2][1]) == 1.0 / 3.0);
  CHECK(split_tokens(table.rows[0][2]) == std::vector<std::string>{"x", "y"});
  CHECK(split_tokens(table.rows[1][2]).empty());
  CHECK_THROWS_AS(table.col("missing"), DataError);
}

TEST_CASE("optional doubles map empty cells to nullopt") {
  CHECK(!parse_opt_double("").has_value());
  CHECK(parse_opt_double("2.5").value() == 2.5);
  CHECK(fmt_opt_double(std::nullopt).empty());
}

TEST_CASE("pgm write/read quantizes to 16 bits and is stable") {
  Rng rng(5);
  ImageGrid img(12, 9, Modality::oct);
  for (auto& p : img.pixels) p = rng.uniform();
  const auto path = temp_dir() / "img.pgm";
  write_pgm16(path, img);
  const ImageGrid back = read_pgm16(path, Modality::oct);
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(std::fabs(back.pixels[i] - img.pixels[i]) <= 0.5 / 65535.0 + 1e-12);

  // A second write of the re-read image is bit-identical on disk.
  const auto path2 = temp_dir() / "img2.pgm";
  write_pgm16(path2, back);
  const ImageGrid back2 = read_pgm16(path2, Modality::oct);
  CHECK(back2.pixels == back.pixels);
}
