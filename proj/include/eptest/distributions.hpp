#pragma once

// Exponential power (generalized normal) family parameterized by its variance,
// plus the Bernoulli-normal spike-and-slab used as a misspecified truth.

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "eptest/errors.hpp"
#include "eptest/rng.hpp"

namespace eptest {

namespace detail {

inline double lgamma(double x) { return boost::math::lgamma(x); }

inline void require_shape(double q) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw DomainError("exponential power shape q must be finite and > 0, got " + std::to_string(q));
  }
}

}  // namespace detail

/// Lowest kurtosis accepted by the inverse map. The q -> infinity limit is 9/5.
inline constexpr double kKurtosisFloor = 1.9;

/// Exponential power prior with variance tau2 and shape q.
///
/// q = 1 is the Laplace distribution, q = 2 the normal. The induced penalty
/// weight is lambda = tau2^(-q/2) * (Gamma(3/q) / Gamma(1/q))^(q/2), so that the
/// negative log density is lambda * |beta|^q plus a constant.
class EpPrior {
public:
  EpPrior(double tau2, double q) : tau2_(tau2), q_(q) {
    if (!(tau2 > 0.0) || !std::isfinite(tau2)) {
      throw DomainError("exponential power variance tau2 must be finite and > 0");
    }
    detail::require_shape(q);
  }

  double tau2() const noexcept { return tau2_; }
  double q() const noexcept { return q_; }

  double lambda() const {
    const double half_q = 0.5 * q_;
    return std::exp(-half_q * std::log(tau2_) +
                    half_q * (detail::lgamma(3.0 / q_) - detail::lgamma(1.0 / q_)));
  }

  /// Scale s with density proportional to exp(-(|beta| / s)^q).
  double scale() const {
    return std::sqrt(tau2_) * std::exp(0.5 * (detail::lgamma(1.0 / q_) - detail::lgamma(3.0 / q_)));
  }

  double log_normalizer() const {
    return std::log(0.5 * q_) - 0.5 * std::log(tau2_) +
           0.5 * (detail::lgamma(3.0 / q_) - 3.0 * detail::lgamma(1.0 / q_));
  }

private:
  double tau2_;
  double q_;
};

/// Bernoulli-normal spike-and-slab: zero with probability 1 - pi, else N(0, tau2 / pi).
struct SpikeSlab {
  double pi;
  double tau2;

  void validate() const {
    if (!(pi > 0.0 && pi <= 1.0)) throw DomainError("spike-and-slab pi must lie in (0, 1]");
    if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw DomainError("spike-and-slab tau2 must be > 0");
  }

  double kurtosis() const { return 3.0 / pi; }
};

inline double ep_log_density(double beta, const EpPrior& prior) {
  if (!std::isfinite(beta)) throw DomainError("ep_density: beta must be finite");
  return prior.log_normalizer() - prior.lambda() * std::pow(std::abs(beta), prior.q());
}

inline double ep_density(double beta, const EpPrior& prior) {
  return std::exp(ep_log_density(beta, prior));
}

/// Draws |beta| = s * G^(1/q) with G ~ gamma(1/q, 1) and a fair random sign.
template <typename Urng>
std::vector<double> ep_sample(std::size_t count, const EpPrior& prior, Urng& rng) {
  if (count == 0) throw DomainError("ep_sample: count must be >= 1");
  const double q = prior.q();
  const double s = prior.scale();
  std::gamma_distribution<double> gamma(1.0 / q, 1.0);
  std::vector<double> out(count);
  for (auto& b : out) {
    const double magnitude = s * std::pow(gamma(rng), 1.0 / q);
    b = (rng() & 1ULL) ? magnitude : -magnitude;
  }
  return out;
}

template <typename Urng>
std::vector<double> spike_slab_sample(std::size_t count, const SpikeSlab& ss, Urng& rng) {
  ss.validate();
  if (count == 0) throw DomainError("spike_slab_sample: count must be >= 1");
  std::bernoulli_distribution slab(ss.pi);
  std::normal_distribution<double> normal(0.0, std::sqrt(ss.tau2 / ss.pi));
  std::vector<double> out(count);
  for (auto& b : out) {
    b = slab(rng) ? normal(rng) : 0.0;
  }
  return out;
}

inline double ep_log_kurtosis(double q) {
  detail::require_shape(q);
  return detail::lgamma(5.0 / q) + detail::lgamma(1.0 / q) - 2.0 * detail::lgamma(3.0 / q);
}

/// Kurtosis E[b^4] / E[b^2]^2 = Gamma(5/q) Gamma(1/q) / Gamma(3/q)^2.
inline double ep_kurtosis(double q) { return std::exp(ep_log_kurtosis(q)); }

/// Inverts ep_kurtosis. Newton iterations on log q, falling back to bisection
/// whenever a step leaves the current bracket.
inline double solve_q_from_kurtosis(double kurt) {
  if (!std::isfinite(kurt) || kurt < kKurtosisFloor) {
    throw OutOfRangeError("kurtosis " + std::to_string(kurt) + " is outside the attainable range [" +
                          std::to_string(kKurtosisFloor) + ", inf)");
  }
  const double target = std::log(kurt);
  // f(u) = log K(e^u) - log kurt is strictly decreasing in u.
  auto f = [&](double u) { return ep_log_kurtosis(std::exp(u)) - target; };
  auto df = [](double u) {
    const double q = std::exp(u);
    using boost::math::digamma;
    return (-5.0 * digamma(5.0 / q) - digamma(1.0 / q) + 6.0 * digamma(3.0 / q)) / q;
  };

  double lo = std::log(0.01);
  double hi = std::log(1000.0);
  while (f(hi) > 0.0) {
    lo = hi;
    hi += std::log(10.0);
    if (hi > std::log(1e12)) throw OutOfRangeError("kurtosis too close to the q -> infinity limit");
  }
  while (f(lo) < 0.0) {
    hi = lo;
    lo -= std::log(10.0);
    if (lo < std::log(1e-4)) throw OutOfRangeError("kurtosis too large to invert");
  }

  double u = (lo < 0.0 && hi > 0.0) ? 0.0 : 0.5 * (lo + hi);
  for (int iter = 0; iter < 300; ++iter) {
    const double fu = f(u);
    if (fu == 0.0) return std::exp(u);
    if (fu > 0.0) lo = u; else hi = u;
    const double slope = df(u);
    double next = u - fu / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-15 * std::max(1.0, std::abs(u)) || hi - lo <= 1e-15) {
      return std::exp(next);
    }
    u = next;
  }
  return std::exp(u);
}

}  // namespace eptest
