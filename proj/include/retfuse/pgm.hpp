#pragma once

#include <filesystem>

#include "retfuse/records.hpp"

namespace retfuse {

// 16-bit binary PGM (P5, maxval 65535, big-endian samples). Pixel values in
// [0, 1] are quantized to the nearest of 65536 levels on write.
void write_pgm16(const std::filesystem::path& path, const ImageGrid& image);
ImageGrid read_pgm16(const std::filesystem::path& path, Modality modality);

}  // namespace retfuse
