#pragma once

#include <cmath>
#include <cstdint>

namespace fusionest {

// Counter-based generator keyed by (seed, run, step, channel). Stateless, so
// Monte Carlo runs can be evaluated in any order or in parallel and still
// reproduce the same streams.
namespace rng {

inline uint64_t mix(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t key(uint64_t seed, uint64_t run, uint64_t step, uint64_t channel) {
  uint64_t h = mix(seed ^ 0x2545f4914f6cdd1dull);
  h = mix(h ^ run);
  h = mix(h ^ step);
  h = mix(h ^ channel);
  return h;
}

/// Uniform draw in [0, 1).
inline double uniform(uint64_t seed, uint64_t run, uint64_t step, uint64_t channel) {
  return static_cast<double>(key(seed, run, step, channel) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two sub-draws of the same channel.
inline double gaussian(uint64_t seed, uint64_t run, uint64_t step, uint64_t channel) {
  const uint64_t base = key(seed, run, step, channel);
  const double u1 = static_cast<double>(mix(base ^ 0x5851f42d4c957f2dull) >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(mix(base ^ 0x14057b7ef767814full) >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace rng
}  // namespace fusionest
