#pragma once

// Gibbs sampler for y = X b + z, z ~ N(0, sigma2 I), b_j i.i.d. EP(tau2, q).
//
// The prior is written as a uniform scale mixture
//   b_j | g_j ~ uniform(-Delta_j, Delta_j),  Delta_j = c g_j^(1/q),
//   g_j ~ gamma(shape = 1 + 1/q, rate = r),  c = sqrt(Gamma(1/q)/Gamma(3/q) * tau2/2),  r = 2^(-q/2).
// Full conditionals:
//   b | g, y   normal N(G^-1 X'y, sigma2 G^-1), G = X'X, restricted to the box |b_j| <= Delta_j.
//              Sampled one coordinate at a time: b_j | b_-j is a univariate truncated normal
//              with mean (X'y - G b)_j / G_jj + b_j and variance sigma2 / G_jj.
//   g_j | b_j  the uniform contributes 1/(2 c g^(1/q)) on {g >= (|b_j|/c)^q}; the g^(-1/q)
//              cancels the gamma's g^(1/q), leaving g_j = (|b_j|/c)^q + Exponential(rate r).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "eptest/distributions.hpp"
#include "eptest/errors.hpp"
#include "eptest/ess.hpp"
#include "eptest/regression_data.hpp"
#include "eptest/rng.hpp"
#include "eptest/testing.hpp"
#include "eptest/truncated_normal.hpp"

namespace eptest {

struct GibbsConfig {
  int iters = 10500;
  int burnIn = 500;
  int thinning = 1;
  bool computeEss = true;
  /// Test hook: drop the likelihood so the chain targets the prior.
  bool ignoreLikelihood = false;
  /// Called after every iteration with (iteration, beta, Delta).
  std::function<void(int, const Vector&, const Vector&)> observer;

  static GibbsConfig simulation() { return {}; }
  static GibbsConfig analysis() {
    GibbsConfig c;
    c.iters = 1'000'500;
    c.burnIn = 500;
    c.thinning = 20;
    return c;
  }
};

struct PosteriorDraws {
  Matrix draws;           ///< retained draws, one row per kept iteration
  Vector mixingWeights;   ///< final latent g
  Vector box;             ///< final Delta
  Vector essPerCoordinate;
  std::vector<bool> essDegenerate;
  int burnIn = 0;
  int thinning = 1;
  int iterations = 0;

  Vector mean() const { return draws.colwise().mean().transpose(); }

  double min_ess() const { return essPerCoordinate.size() ? essPerCoordinate.minCoeff() : 0.0; }

  /// Per-coordinate quantile with linear interpolation between order statistics.
  Vector quantile(double prob) const {
    Vector out(draws.cols());
    std::vector<double> column(static_cast<std::size_t>(draws.rows()));
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
      for (Eigen::Index i = 0; i < draws.rows(); ++i) column[static_cast<std::size_t>(i)] = draws(i, j);
      std::sort(column.begin(), column.end());
      const double h = prob * static_cast<double>(column.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, column.size() - 1);
      out(j) = column[lo] + (h - static_cast<double>(lo)) * (column[hi] - column[lo]);
    }
    return out;
  }
};

/// Half-width constant c and latent rate r of the uniform mixture.
struct MixtureConstants {
  double c;
  double rate;
  double q;

  explicit MixtureConstants(const EpPrior& prior)
      : c(prior.scale() / std::sqrt(2.0)), rate(std::pow(2.0, -0.5 * prior.q())), q(prior.q()) {}

  double half_width(double g) const { return c * std::pow(g, 1.0 / q); }
};

template <typename Urng>
PosteriorDraws gibbs_sampler(const RegressionData& data, const EpPrior& prior, double sigma2,
                             const GibbsConfig& cfg, Urng& rng) {
  validate(data);
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("gibbs_sampler needs sigma2 > 0");
  if (cfg.iters <= cfg.burnIn || cfg.burnIn < 0 || cfg.thinning < 1) {
    throw DomainError("gibbs_sampler needs iters > burnIn >= 0 and thinning >= 1");
  }
  const Eigen::Index p = data.p();
  const int retained = (cfg.iters - cfg.burnIn) / cfg.thinning;
  if (retained < 1) throw DomainError("gibbs_sampler configuration retains no draws");

  const Matrix gram = detail::gram(data.X);
  const Vector xty = data.X.transpose() * data.y;
  const MixtureConstants mix(prior);
  const double q = prior.q();

  std::gamma_distribution<double> latent_prior(1.0 + 1.0 / q, 1.0 / mix.rate);
  std::exponential_distribution<double> latent_excess(mix.rate);

  Vector beta = Vector::Zero(p);
  Vector gbeta = Vector::Zero(p);
  Vector latent(p);
  Vector box(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    latent(j) = latent_prior(rng);
    box(j) = mix.half_width(latent(j));
  }

  PosteriorDraws out;
  out.draws.resize(retained, p);
  out.burnIn = cfg.burnIn;
  out.thinning = cfg.thinning;
  out.iterations = cfg.iters;
  Eigen::Index row = 0;

  for (int it = 1; it <= cfg.iters; ++it) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      const double old = beta(j);
      double next;
      if (cfg.ignoreLikelihood || !(gjj > 0.0)) {
        next = box(j) * (2.0 * detail::open_uniform(rng) - 1.0);
      } else {
        const double mean = (xty(j) - gbeta(j)) / gjj + old;
        next = truncated_normal(mean, std::sqrt(sigma2 / gjj), -box(j), box(j), rng);
      }
      if (!cfg.ignoreLikelihood && next != old) gbeta += (next - old) * gram.col(j);
      beta(j) = next;
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      latent(j) = std::pow(std::abs(beta(j)) / mix.c, q) + latent_excess(rng);
      box(j) = std::max(mix.half_width(latent(j)), std::abs(beta(j)));
      if (!std::isfinite(box(j)) || !std::isfinite(beta(j))) {
        throw NumericalError("gibbs_sampler produced a non-finite state at iteration " + std::to_string(it));
      }
    }
    if (cfg.observer) cfg.observer(it, beta, box);
    if (it > cfg.burnIn && (it - cfg.burnIn) % cfg.thinning == 0 && row < retained) {
      out.draws.row(row++) = beta.transpose();
    }
  }
  if (row != retained) throw InvariantError("gibbs_sampler retained an unexpected number of draws");

  out.mixingWeights = latent;
  out.box = box;
  out.essPerCoordinate = Vector::Constant(p, static_cast<double>(retained));
  out.essDegenerate.assign(static_cast<std::size_t>(p), false);
  if (cfg.computeEss && retained >= 10) {
    std::vector<double> column(static_cast<std::size_t>(retained));
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i < retained; ++i) column[static_cast<std::size_t>(i)] = out.draws(i, j);
      const EssResult ess = effective_sample_size(column);
      out.essPerCoordinate(j) = ess.ess;
      out.essDegenerate[static_cast<std::size_t>(j)] = ess.degenerate;
    }
  }
  return out;
}

}  // namespace eptest
