#include "retfuse/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "retfuse/errors.hpp"

namespace retfuse {

void write_pgm16(const std::filesystem::path& path, const ImageGrid& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n65535\n";
  std::vector<unsigned char> buf(image.pixels.size() * 2);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    double v = image.pixels[i];
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    buf[2 * i] = static_cast<unsigned char>(q >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

ImageGrid read_pgm16(const std::filesystem::path& path, Modality modality) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing image file: " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0;
  unsigned maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 65535) throw DataError("unsupported pgm format: " + path.string());
  in.get();  // single whitespace after maxval
  ImageGrid image(h, w, modality);
  std::vector<unsigned char> buf(w * h * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw DataError("truncated pgm file: " + path.string());
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned q = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
    image.pixels[i] = static_cast<double>(q) / 65535.0;
  }
  return image;
}

}  // namespace retfuse
