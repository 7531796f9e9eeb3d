#pragma once

#include <cmath>
#include <cstdint>

#include "simmimo/types.hpp"

namespace simmimo {

// splitmix64: tiny, fast, bit-portable across platforms. Chosen over
// std::mt19937 + std::*_distribution, whose outputs are not guaranteed to be
// identical across standard library implementations; the reproducibility
// contract requires bit-identical streams everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1] — safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform angle in [0, 2*pi).
  double uniform_angle() { return 6.283185307179586477 * uniform01(); }

  // Standard circularly-symmetric complex normal, E|z|^2 = 1, via the polar
  // Box-Muller transform: sqrt(-ln u1) * exp(j*2*pi*u2).
  cplx complex_normal() {
    const double r = std::sqrt(-std::log(uniform_pos()));
    const double phi = uniform_angle();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  // Deterministic per-index substream derivation: every parallel work item
  // (e.g. one Monte Carlo trial) gets its own generator so that results do
  // not depend on scheduling.
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace simmimo
