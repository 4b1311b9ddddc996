#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace rci {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent child seeds from a
/// master seed and a stream label, so that replicate k never depends on how
/// many draws replicate k-1 consumed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(master) ^ a) ^ b) ^ c);
}

// Samplers written out so that streams are identical across standard
// library implementations (std::normal_distribution is not specified).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double std_normal(Rng& rng) {
  // Box-Muller, one variate per call; the sine branch is discarded to keep
  // the stream position a fixed function of the number of draws.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

inline double normal(Rng& rng, double mean, double sd) { return mean + sd * std_normal(rng); }

inline int bernoulli(Rng& rng, double p) { return uniform01(rng) < p ? 1 : 0; }

} // namespace rci
