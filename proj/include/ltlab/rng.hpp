#pragma once
// Counter-based seeded random streams. Every source of randomness in the
// library flows from one root seed through named streams, so any run can be
// reproduced bit-exactly from (seed, stream-id).

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ltlab {

// Named stream ids for the root seed. Keep these stable: changing an id
// changes every downstream result.
namespace stream {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t batch = 3;
inline constexpr std::uint64_t mixup = 4;
inline constexpr std::uint64_t ensemble = 5;
inline constexpr std::uint64_t test_data = 6;
inline constexpr std::uint64_t prune = 7;
}  // namespace stream

// splitmix64 finalizer: bijective 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: output i is mix64(key + i*phi), where the key is
// derived from (seed, stream_id). Distinct stream ids give unrelated
// sequences; the counter makes replay trivial.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix64(seed) ^ mix64(mix64(stream_id) + 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t seed_key() const { return key_; }

  std::uint64_t next_u64() {
    return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  // Standard normal via Box-Muller; the second value is cached.
  double next_gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double next_gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("next_gamma: shape <= 0");
    if (shape < 1.0) {
      const double u = next_double();
      return next_gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 1e-300, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = next_gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v;
      }
    }
  }

  // Beta(alpha, alpha), used for mixup coefficients.
  double next_beta(double alpha) {
    const double x = next_gamma(alpha);
    const double y = next_gamma(alpha);
    const double s = x + y;
    return s > 0.0 ? x / s : 0.5;
  }

  // Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace ltlab
