#pragma once

#include <cstdint>
#include <random>

namespace survkit {

// splitmix64 finalizer; decorrelates structured seed inputs such as
// (master_seed, tree_index) or (seed, subject_index).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(mix64(seed)); }

}  // namespace survkit
