#pragma once

#include <cmath>
#include <limits>

#include "eptest/distributions.hpp"
#include "eptest/errors.hpp"

namespace eptest {

namespace detail {

/// Safeguarded Newton for an increasing function g on [lo, hi] with g(lo) < 0 < g(hi).
template <typename G, typename DG>
double increasing_root(G&& g, DG&& dg, double lo, double hi, double start) {
  double x = start;
  for (int iter = 0; iter < 200; ++iter) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    if (gx < 0.0) lo = x; else hi = x;
    double next = x - gx / dg(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x) || hi - lo <= 0.0) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace detail

/// Magnitude minimizing (1/(2 s)) (b - t)^2 + lambda b^q over b >= 0, for t >= 0.
///
/// For q < 1 the objective is nonconvex: the interior stationary point to the
/// right of the inflection (lambda q (1-q) s)^(1/(2-q)) is compared with 0 and
/// ties go to 0.
inline double threshold_magnitude(double t, double s, double lambda, double q) {
  if (!(t > 0.0)) return 0.0;
  if (q == 1.0) return std::max(0.0, t - lambda * s);
  if (q == 2.0) return t / (1.0 + 2.0 * lambda * s);
  auto g = [&](double b) { return (b - t) / s + lambda * q * std::pow(b, q - 1.0); };
  auto dg = [&](double b) { return 1.0 / s + lambda * q * (q - 1.0) * std::pow(b, q - 2.0); };
  if (q > 1.0) {
    // g(0+) = -t/s < 0 and g(t) > 0; g is increasing.
    return detail::increasing_root(g, dg, 0.0, t, t);
  }
  const double inflection = std::pow(lambda * q * (1.0 - q) * s, 1.0 / (2.0 - q));
  if (inflection >= t) return 0.0;
  if (g(inflection) >= 0.0) return 0.0;
  const double root = detail::increasing_root(g, dg, inflection, t, t);
  const double at_root = 0.5 * (root - t) * (root - t) / s + lambda * std::pow(root, q);
  const double at_zero = 0.5 * t * t / s;
  return at_root < at_zero ? root : 0.0;
}

/// Global minimizer of (1/(2 sigma2)) (bOls - b)^2 + lambda |b|^q for the prior's lambda and q.
inline double mode_threshold(double bOls, double sigma2, const EpPrior& prior) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("mode_threshold: sigma2 must be > 0");
  if (!std::isfinite(bOls)) throw DomainError("mode_threshold: bOls must be finite");
  const double magnitude = threshold_magnitude(std::abs(bOls), sigma2, prior.lambda(), prior.q());
  if (magnitude == 0.0) return 0.0;
  return std::signbit(bOls) ? -magnitude : magnitude;
}

}  // namespace eptest
