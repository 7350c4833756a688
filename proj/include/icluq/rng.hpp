// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file rng.hpp
 * @brief Portable, splittable randomness for sampling and simulation.
 *
 * All randomness in the library is counter-based: a 64-bit key is derived by
 * hashing a seed together with structural ids (instance, demo set, config,
 * draw tag), and draws come from a SplitMix64 stream rooted at that key. Any
 * cell of an experiment can therefore be recomputed independently, in any
 * order, on any platform, with no shared generator state.
 */

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace icluq::rng {

/// SplitMix64 finalizer: a well-mixed 64-bit avalanche function.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a list of 64-bit words into one key. Order-sensitive.
inline constexpr std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x8e8f3a6f1dba2f43ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  return h;
}

/// Deterministic stream of draws rooted at a derived key.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1); never returns exactly zero.
  double next_open_double() {
    double u = next_double();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  /// Uniform integer in [0, n) by rejection; unbiased for any n >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Marsaglia polar method.
  double next_normal() {
    for (;;) {
      const double u = 2.0 * next_double() - 1.0;
      const double v = 2.0 * next_double() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  /**
   * log of a Gamma(shape, 1) draw, valid for any shape > 0.
   *
   * Marsaglia–Tsang squeeze for shape >= 1; the shape < 1 case boosts via
   * G(a) = G(a+1) * U^(1/a) computed in log space, which stays finite for
   * concentrations far below 1 where the draw itself would underflow.
   */
  double next_log_gamma(double shape) {
    if (shape < 1.0) {
      const double lg = next_log_gamma(shape + 1.0);
      return lg + std::log(next_open_double()) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = next_normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = next_open_double();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace icluq::rng
