#ifndef PREFCAL_RNG_HPP
#define PREFCAL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace prefcal {

/// Seedable random source with hand-rolled variate generation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; all distributions are implemented here rather than with the
/// standard <random> distribution templates, so that every draw is
/// bit-identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Bernoulli draw; p = 1 always succeeds, p = 0 never does.
  int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    // 1 - u1 keeps the log argument in (0, 1].
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Index draw from a cumulative mass table (last entry = total mass).
  std::size_t categorical_from_cdf(std::span<const double> cdf) {
    if (cdf.empty()) throw std::invalid_argument("categorical: empty cdf");
    double u = uniform01() * cdf.back();
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (u < cdf[mid]) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape <= 0");
    if (shape < 1.0) {
      // Boost to shape + 1 and scale back.
      double g = gamma(shape + 1.0);
      double u = uniform01();
      while (u == 0.0) u = uniform01();
      return g * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform01();
      if (u == 0.0) continue;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  /// Beta(a, b) draw from two gammas.
  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; the backbone of seed-stream derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a base seed and stream coordinates, so parallel
/// or per-step generators never share state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x853c49e6748fea9bULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

}  // namespace prefcal

#endif  // PREFCAL_RNG_HPP
