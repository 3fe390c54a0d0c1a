#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace graspmatch {

/// Deterministic random stream used throughout the library.
///
/// All sampling primitives are implemented on top of the raw 64-bit output of
/// std::mt19937_64 rather than std:: distributions, so a given seed produces
/// the same sequence on every platform and standard library. Parallel code
/// derives one stream per particle (base_seed + particle_id), which makes
/// results independent of the worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of entropy.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Rejection-free Lemire reduction with a
  /// widening multiply; bias is eliminated by the rejection loop.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Multiply-shift with rejection of the biased low range.
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0ull - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller (polar form avoided to keep the
  /// consumption of engine outputs fixed per call pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace graspmatch
