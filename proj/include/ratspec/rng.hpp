#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "ratspec/common.hpp"

namespace ratspec {

/// Counter-based generator: the stream is a pure function of (key, counter),
/// so disjoint keys can be drawn from concurrently without any shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  /// SplitMix64 finalizer; full-period bijective mixer on 64 bits.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Derives a subkey from a key and a sequence of integer labels.
  template <typename... Parts>
  static std::uint64_t derive(std::uint64_t key, Parts... parts) {
    std::uint64_t k = mix(key ^ 0xA0761D6478BD642FULL);
    ((k = mix(k ^ mix(static_cast<std::uint64_t>(parts)))), ...);
    return k;
  }

  std::uint64_t next_u64() { return mix(key_ ^ mix(++counter_)); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the paired variate is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Complex standard normal: E|z|^2 = 1.
  Complex gaussian_complex() {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    double re = gaussian();
    double im = gaussian();
    return Complex(re * inv_sqrt2, im * inv_sqrt2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ratspec
