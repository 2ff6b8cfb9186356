#ifndef SUPERLORA_RNG_HPP
#define SUPERLORA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace superlora {

// splitmix64 finalizer; the bijective mixer behind every random source here.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Derive an independent child seed from a parent seed and a tag. Chained
// derivations give one stable stream per (group, split, tensor, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix64(base ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
}

// Inverse standard-normal CDF, Acklam's rational approximation (relative
// error ~1.1e-9). Uses only *, /, sqrt and log so draws are reproducible at
// the f64 level wherever libm agrees.
inline double inverse_normal_cdf(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("inverse_normal_cdf: p outside (0,1)");
  constexpr double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Counter-based generator: draw i of stream (seed, stream) is
//   mix64(key + (i+1) * 0x9e3779b97f4a7c15)   with
//   key = mix64(seed ^ 0x9e3779b97f4a7c15) ^ mix64(stream + 0xbf58476d1ce4e5b9).
// Fixed by the adapter file format: regenerating projection weights and
// init values from a stored seed must reproduce them bitwise.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed ^ 0x9e3779b97f4a7c15ULL) ^ mix64(stream + 0xbf58476d1ce4e5b9ULL)) {}

  std::uint64_t value_at(std::uint64_t i) const {
    return mix64(key_ + (i + 1) * 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t next_u64() { return value_at(counter_++); }

  // uniform on the open interval (0,1); never returns an endpoint
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return inverse_normal_cdf(next_uniform()); }

  double next_rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  // uniform integer in [0, n); plain modulo (bias ~ n * 2^-64, irrelevant here)
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("CounterRng::next_below: n == 0");
    return next_u64() % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace superlora

#endif  // SUPERLORA_RNG_HPP
