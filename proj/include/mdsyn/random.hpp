#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mdsyn {

// All stochastic code draws from this engine. The mappings below are written
// out explicitly because std::*_distribution output is implementation-defined.
using Rng = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Independent stream for one work item, keyed by (global seed, item key).
// Order-independent: the stream depends only on the pair, not on scheduling.
Rng derive_rng(std::uint64_t seed, std::string_view key);
Rng derive_rng(std::uint64_t seed, std::uint64_t key);

}  // namespace mdsyn
