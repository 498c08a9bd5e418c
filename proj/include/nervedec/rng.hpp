#pragma once

#include <cstdint>
#include <random>

namespace nervedec {

// splitmix64 step; used to derive independent child seeds from one base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return mix_seed(base ^ mix_seed(salt));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(mix_seed(seed)); }

}  // namespace nervedec
