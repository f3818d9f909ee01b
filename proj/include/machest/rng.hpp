#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>

namespace machest {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// splitmix64 finalizer; used for seed derivation so that child streams
/// of a master seed do not overlap.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

/// Deterministic random stream. Distributions are implemented here rather
/// than with std:: distribution objects, whose output is
/// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller pair of independent standard normals.
  std::pair<double, double> normal_pair() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = kTwoPi * uniform();
    return {r * std::cos(t), r * std::sin(t)};
  }

  double normal() { return normal_pair().first; }

  /// Circularly-symmetric complex Gaussian CN(0, variance),
  /// drawn as (g1 + j*g2) * sqrt(variance/2).
  std::complex<double> complex_normal(double variance) {
    const auto [g1, g2] = normal_pair();
    const double s = std::sqrt(variance / 2.0);
    return {g1 * s, g2 * s};
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace machest
