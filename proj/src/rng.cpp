#include "retfuse/rng.hpp"

#include <cmath>

namespace retfuse {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t root, std::string_view tag) {
  std::uint64_t sm = root ^ fnv1a64(tag);
  splitmix64(sm);
  return splitmix64(sm);
}

std::uint64_t stream_seed(std::uint64_t root, std::string_view tag, std::uint64_t index) {
  std::uint64_t sm = stream_seed(root, tag) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  splitmix64(sm);
  return splitmix64(sm);
}

}  // namespace retfuse
