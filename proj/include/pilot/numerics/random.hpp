#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pilot {

using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<double> normal_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> out(n);
  for (double& v : out) v = scale * standard_normal(rng);
  return out;
}

// Derives an independent stream seed from a parent seed and a tag (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace pilot
