#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <boost/math/special_functions/erf.hpp>

#include "eptest/errors.hpp"

namespace eptest {

namespace detail {

/// Uniform on the open interval (0, 1).
template <typename Urng>
double open_uniform(Urng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Upper-tail probability Q(x) = 1 - Phi(x).
inline double normal_upper(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Q^-1(u) for u in (0, 1).
inline double normal_upper_inv(double u) { return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u); }

/// Standard normal restricted to [a, b] with 0 <= a < b.
template <typename Urng>
double upper_tail_normal(double a, double b, Urng& rng) {
  constexpr double kDeepTail = 30.0;
  if (a < kDeepTail) {
    const double qa = normal_upper(a);
    const double qb = normal_upper(b);
    const double u = qb + open_uniform(rng) * (qa - qb);
    if (!(u > 0.0)) return a;
    return std::clamp(normal_upper_inv(u), a, b);
  }
  // Far tail: Q(a) underflows, so sample by rejection.
  if (b - a < 1.0 / a) {
    for (;;) {
      const double x = a + (b - a) * open_uniform(rng);
      if (std::log(open_uniform(rng)) <= 0.5 * (a * a - x * x)) return x;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a - std::log(open_uniform(rng)) / rate;
    if (x > b) continue;
    const double d = x - rate;
    if (std::log(open_uniform(rng)) <= -0.5 * d * d) return x;
  }
}

}  // namespace detail

/// Standard normal restricted to [a, b].
///
/// Wide windows use plain rejection; otherwise inverse-CDF sampling, done in the
/// tail nearest the window so that tiny probabilities keep full precision.
template <typename Urng>
double standard_truncated_normal(double a, double b, Urng& rng) {
  if (!(a <= b) || std::isnan(a) || std::isnan(b)) throw DomainError("truncated normal: need a <= b");
  if (a == b) return a;
  if (a <= -2.0 && b >= 2.0) {
    std::normal_distribution<double> normal;
    for (;;) {
      const double x = normal(rng);
      if (x >= a && x <= b) return x;
    }
  }
  if (a >= 0.0) return detail::upper_tail_normal(a, b, rng);
  if (b <= 0.0) return -detail::upper_tail_normal(-b, -a, rng);
  // a < 0 < b: both endpoint probabilities are at most one tail away from 1/2.
  const double pa = detail::normal_upper(-a);  // Phi(a)
  const double pb = 1.0 - detail::normal_upper(b);
  const double u = pa + detail::open_uniform(rng) * (pb - pa);
  return std::clamp(-detail::normal_upper_inv(u), a, b);
}

/// N(mean, sd^2) restricted to [lo, hi].
template <typename Urng>
double truncated_normal(double mean, double sd, double lo, double hi, Urng& rng) {
  if (!(sd > 0.0)) throw DomainError("truncated normal: sd must be > 0");
  const double x = standard_truncated_normal((lo - mean) / sd, (hi - mean) / sd, rng);
  return std::clamp(mean + sd * x, lo, hi);
}

}  // namespace eptest
