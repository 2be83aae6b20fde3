#pragma once

// Two-stage adaptive estimation: test H: q = 1, then estimate b under the
// Laplace prior on acceptance or under EP(tau2_hat, q_hat) on rejection.

#include <cstdint>
#include <optional>
#include <string>

#include "eptest/coordinate_descent.hpp"
#include "eptest/distributions.hpp"
#include "eptest/eb_estimation.hpp"
#include "eptest/gibbs.hpp"
#include "eptest/regression_data.hpp"
#include "eptest/rng.hpp"
#include "eptest/testing.hpp"

namespace eptest {

enum class Summary { Mode, Mean, Both };

inline bool wants_mode(Summary s) { return s != Summary::Mean; }
inline bool wants_mean(Summary s) { return s != Summary::Mode; }

inline const char* to_string(Summary s) {
  switch (s) {
    case Summary::Mode: return "mode";
    case Summary::Mean: return "mean";
    case Summary::Both: return "both";
  }
  return "unknown";
}

struct AdaptiveConfig {
  double alpha = 0.05;
  Summary summary = Summary::Both;
  std::int64_t mcReps = kDefaultMcReps;
  GibbsConfig chain = GibbsConfig::analysis();
  ModeConfig mode;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// When false the estimated q is used even if the test accepts.
  bool gate = true;
};

/// Posterior summaries under one fixed prior.
struct PriorFit {
  EpPrior prior{1.0, 1.0};
  std::optional<ModeFit> mode;
  std::optional<PosteriorDraws> draws;
  std::optional<Vector> posteriorMean;
};

/// Mode and/or Gibbs summaries. The streams depend only on `seed`, so two calls
/// with the same prior and seed are bit-identical.
inline PriorFit fit_prior(const RegressionData& data, const EpPrior& prior, double sigma2, Summary summary,
                          const GibbsConfig& chain, ModeConfig mode, std::uint64_t seed, unsigned threads) {
  PriorFit fit{prior, std::nullopt, std::nullopt, std::nullopt};
  mode.seed = derive_seed(seed, {streams::kFit, streams::kMode});
  mode.threads = threads;
  if (wants_mode(summary)) fit.mode = coordinate_descent_mode(data, prior, sigma2, std::nullopt, mode);
  if (wants_mean(summary)) {
    Rng rng = substream(seed, {streams::kFit, streams::kGibbs});
    fit.draws = gibbs_sampler(data, prior, sigma2, chain, rng);
    fit.posteriorMean = fit.draws->mean();
  }
  return fit;
}

enum class AdaptiveStatus { Ok, Boundary };

struct AdaptiveResult {
  AdaptiveStatus status = AdaptiveStatus::Ok;
  std::string message;
  TestOutcome test;
  VarianceEstimates variances;
  ShapeEstimate shape;
  double qUsed = 1.0;
  std::optional<PriorFit> fit;

  const std::optional<ModeFit>& mode() const { return fit->mode; }
  const std::optional<PosteriorDraws>& draws() const { return fit->draws; }
  const std::optional<Vector>& posteriorMean() const { return fit->posteriorMean; }
};

/// Everything up to (and excluding) the posterior summaries.
inline AdaptiveResult adaptive_prepare(const RegressionData& data, const TestPlan& plan, const NullDistribution& null,
                                       double alpha, bool gate) {
  AdaptiveResult result;
  result.test = laplace_test(data, plan, null, alpha);
  result.variances = estimate_variances(data);
  result.shape = estimate_q(data, plan);
  result.qUsed = (gate && !result.test.reject) ? 1.0 : result.shape.q;
  if (result.variances.sigma2Hat == 0.0) {
    result.status = AdaptiveStatus::Boundary;
    result.message = "variance estimate sigma2 = 0 lies on the boundary; posterior estimation is not attempted";
  } else if (result.variances.tau2Hat == 0.0) {
    result.status = AdaptiveStatus::Boundary;
    result.message = "variance estimate tau2 = 0 lies on the boundary; posterior estimation is not attempted";
  }
  return result;
}

inline AdaptiveResult adaptive_estimate(const RegressionData& input, const AdaptiveConfig& cfg) {
  validate(input);
  const TestPlan plan = plan_test(input.X);
  const NullDistribution null =
      simulate_null(plan, NullOptions{cfg.mcReps, derive_seed(cfg.seed, {streams::kTest}), cfg.threads, 1.0});
  AdaptiveResult result = adaptive_prepare(input, plan, null, cfg.alpha, cfg.gate);
  if (result.status != AdaptiveStatus::Ok) return result;
  result.fit = fit_prior(input, EpPrior(result.variances.tau2Hat, result.qUsed), result.variances.sigma2Hat,
                         cfg.summary, cfg.chain, cfg.mode, cfg.seed, cfg.threads);
  return result;
}

}  // namespace eptest
