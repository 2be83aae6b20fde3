#pragma once

// Simulation harness for the level/power and estimation studies.
//
// Data follow y = X b + z with standard normal design entries, z ~ N(0, sigma2 I)
// and b drawn from an EP or spike-and-slab truth. A fresh X is drawn for every
// replicate when n > p; when n <= p one X is drawn per (n, p) and shared so the
// ridge null distribution can be simulated once.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "eptest/adaptive.hpp"
#include "eptest/distributions.hpp"
#include "eptest/eb_estimation.hpp"
#include "eptest/regression_data.hpp"
#include "eptest/rng.hpp"
#include "eptest/testing.hpp"

namespace eptest {

using Truth = std::variant<EpPrior, SpikeSlab>;

struct Scenario {
  Eigen::Index n = 200;
  Eigen::Index p = 100;
  Truth truth = EpPrior(1.0, 1.0);
  int replicates = 100;
  std::uint64_t seed = 0;
  double sigma2 = 1.0;
};

inline std::string describe(const Truth& truth) {
  std::ostringstream out;
  out.precision(17);
  if (const auto* ep = std::get_if<EpPrior>(&truth)) {
    out << "ep_q" << ep->q() << "_tau2_" << ep->tau2();
  } else {
    const auto& ss = std::get<SpikeSlab>(truth);
    out << "spikeslab_pi" << ss.pi << "_tau2_" << ss.tau2;
  }
  return out.str();
}

inline std::string describe(const Scenario& s) {
  return "n" + std::to_string(s.n) + "_p" + std::to_string(s.p) + "_" + describe(s.truth);
}

inline std::uint64_t scenario_key(const Scenario& s) {
  if (const auto* ep = std::get_if<EpPrior>(&s.truth)) {
    return derive_seed(0, {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.p), 1,
                           std::bit_cast<std::uint64_t>(ep->q()), std::bit_cast<std::uint64_t>(ep->tau2()),
                           std::bit_cast<std::uint64_t>(s.sigma2)});
  }
  const auto& ss = std::get<SpikeSlab>(s.truth);
  return derive_seed(0, {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.p), 2,
                         std::bit_cast<std::uint64_t>(ss.pi), std::bit_cast<std::uint64_t>(ss.tau2),
                         std::bit_cast<std::uint64_t>(s.sigma2)});
}

inline bool uses_fixed_design(const Scenario& s) { return s.n <= s.p; }

template <typename Urng>
Matrix simulate_design(Eigen::Index n, Eigen::Index p, Urng& rng) {
  std::normal_distribution<double> normal;
  Matrix X(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = normal(rng);
  return X;
}

template <typename Urng>
Vector draw_truth(const Truth& truth, Eigen::Index p, Urng& rng) {
  std::vector<double> draw;
  if (const auto* ep = std::get_if<EpPrior>(&truth)) {
    draw = ep_sample(static_cast<std::size_t>(p), *ep, rng);
  } else {
    draw = spike_slab_sample(static_cast<std::size_t>(p), std::get<SpikeSlab>(truth), rng);
  }
  return Eigen::Map<const Vector>(draw.data(), p);
}

inline Matrix fixed_design(const Scenario& s) {
  Rng rng = substream(s.seed, {streams::kDesign, static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.p)});
  return simulate_design(s.n, s.p, rng);
}

struct SimulatedData {
  RegressionData data;
  Vector beta;
};

/// Replicate `rep`, regeneration `attempt`. `fixedX` is used when the scenario shares a design.
inline SimulatedData simulate_replicate(const Scenario& s, int rep, int attempt, const Matrix* fixedX) {
  Rng rng = substream(s.seed, {streams::kReplicate, scenario_key(s), static_cast<std::uint64_t>(rep),
                               static_cast<std::uint64_t>(attempt)});
  Matrix X = fixedX ? *fixedX : simulate_design(s.n, s.p, rng);
  Vector beta = draw_truth(s.truth, s.p, rng);
  std::normal_distribution<double> noise(0.0, std::sqrt(s.sigma2));
  Vector y = X * beta;
  for (Eigen::Index i = 0; i < s.n; ++i) y(i) += noise(rng);
  return {make_data(std::move(y), std::move(X)), std::move(beta)};
}

/// Null distributions shared across replicates: one per p on the OLS path and
/// one per fixed design on the ridge path.
class NullCache {
public:
  NullCache(std::int64_t mcReps, unsigned threads) : mcReps_(mcReps), threads_(threads) {}

  std::shared_ptr<const NullDistribution> ols(Eigen::Index p, std::uint64_t seed) {
    const auto key = std::make_tuple(seed, p, Eigen::Index{0}, std::uint64_t{0});
    auto& slot = cache_[key];
    if (!slot) {
      NullOptions opt{mcReps_, derive_seed(seed, {streams::kNull, static_cast<std::uint64_t>(p)}), threads_, 1.0};
      slot = std::make_shared<const NullDistribution>(simulate_null(nullptr, p, opt));
    }
    return slot;
  }

  std::shared_ptr<const NullDistribution> for_plan(const TestPlan& plan, Eigen::Index n, std::uint64_t seed) {
    const Eigen::Index p = plan.decomp.p();
    if (plan.kind == TestKind::Ols) return ols(p, seed);
    const auto key = std::make_tuple(seed, p, n, std::uint64_t{1});
    auto& slot = cache_[key];
    if (!slot) {
      NullOptions opt{mcReps_,
                      derive_seed(seed, {streams::kNull, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(n)}),
                      threads_, 1.0};
      slot = std::make_shared<const NullDistribution>(simulate_null(plan, opt));
    }
    return slot;
  }

  std::int64_t mcReps() const { return mcReps_; }

private:
  std::int64_t mcReps_;
  unsigned threads_;
  std::map<std::tuple<std::uint64_t, Eigen::Index, Eigen::Index, std::uint64_t>,
           std::shared_ptr<const NullDistribution>>
      cache_;
};

/// Design-level state shared by every replicate of a scenario.
struct ScenarioContext {
  std::optional<Matrix> X;
  std::optional<TestPlan> plan;
  std::shared_ptr<const NullDistribution> olsNull;
  std::shared_ptr<const NullDistribution> planNull;
};

inline ScenarioContext prepare_scenario(const Scenario& s, NullCache& cache) {
  if (s.p < 2 || s.n < 2 || s.replicates < 1) throw DomainError("scenario needs n, p >= 2 and replicates >= 1");
  ScenarioContext ctx;
  if (uses_fixed_design(s)) {
    ctx.X = fixed_design(s);
    ctx.plan = plan_test(*ctx.X);
    ctx.planNull = cache.for_plan(*ctx.plan, s.n, s.seed);
  } else {
    ctx.olsNull = cache.ols(s.p, s.seed);
  }
  return ctx;
}

/// Plan and null for one replicate's design.
inline std::pair<TestPlan, std::shared_ptr<const NullDistribution>> replicate_plan(
    const Scenario& s, const ScenarioContext& ctx, const Matrix& X, int rep, std::int64_t mcReps) {
  if (ctx.plan) return {*ctx.plan, ctx.planNull};
  TestPlan plan = plan_test(X);
  if (plan.kind == TestKind::Ols) return {std::move(plan), ctx.olsNull};
  // A fresh design that happens to be ill conditioned needs its own ridge null.
  NullOptions opt{mcReps, derive_seed(s.seed, {streams::kNull, scenario_key(s), static_cast<std::uint64_t>(rep)}), 1,
                  1.0};
  auto null = std::make_shared<const NullDistribution>(simulate_null(plan, opt));
  return {std::move(plan), std::move(null)};
}

// ---------------------------------------------------------------------------
// Level / power

struct PowerOptions {
  double alpha = 0.05;
  std::int64_t mcReps = 100'000;
  unsigned threads = 1;
};

struct PowerRow {
  int replicate = 0;
  bool failed = false;
  std::string error;
  TestOutcome test;
};

struct PowerReport {
  Scenario scenario;
  double alpha = 0.05;
  std::int64_t mcReps = 0;
  std::vector<PowerRow> rows;
  int completed = 0;
  int failures = 0;
  double rejectionRate = 0.0;
  double standardError = 0.0;  ///< binomial standard error of rejectionRate
};

inline PowerReport run_power_scenario(const Scenario& s, const PowerOptions& opt, NullCache& cache) {
  const ScenarioContext ctx = prepare_scenario(s, cache);
  PowerReport report;
  report.scenario = s;
  report.alpha = opt.alpha;
  report.mcReps = opt.mcReps;
  report.rows.resize(static_cast<std::size_t>(s.replicates));
  parallel_for(report.rows.size(), opt.threads, [&](std::size_t r) {
    PowerRow& row = report.rows[r];
    row.replicate = static_cast<int>(r);
    try {
      const int rep = static_cast<int>(r);
      SimulatedData sim = simulate_replicate(s, rep, 0, ctx.X ? &*ctx.X : nullptr);
      auto [plan, null] = replicate_plan(s, ctx, sim.data.X, rep, opt.mcReps);
      row.test = laplace_test(sim.data, plan, *null, opt.alpha);
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  int rejected = 0;
  for (const auto& row : report.rows) {
    if (row.failed) {
      ++report.failures;
      continue;
    }
    ++report.completed;
    rejected += row.test.reject ? 1 : 0;
  }
  if (report.completed > 0) {
    report.rejectionRate = static_cast<double>(rejected) / report.completed;
    report.standardError = std::sqrt(report.rejectionRate * (1.0 - report.rejectionRate) / report.completed);
  }
  return report;
}

inline std::vector<PowerReport> run_power_study(const std::vector<Scenario>& grid, const PowerOptions& opt) {
  if (grid.empty()) throw DomainError("power study grid is empty");
  NullCache cache(opt.mcReps, opt.threads);
  std::vector<PowerReport> out;
  out.reserve(grid.size());
  for (const auto& s : grid) out.push_back(run_power_scenario(s, opt, cache));
  return out;
}

// ---------------------------------------------------------------------------
// Estimation

/// Fraction of coordinates whose zero / nonzero status is identified correctly.
inline double zero_agreement(const Vector& truth, const Vector& estimate) {
  Eigen::Index hits = 0;
  for (Eigen::Index j = 0; j < truth.size(); ++j) hits += ((truth(j) == 0.0) == (estimate(j) == 0.0)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Fraction of coordinates with |b_j - estimate_j| > threshold.
inline double far_fraction(const Vector& truth, const Vector& estimate, double threshold) {
  return static_cast<double>(((truth - estimate).array().abs() > threshold).count()) /
         static_cast<double>(truth.size());
}

inline double mse(const Vector& truth, const Vector& estimate) {
  return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
}

struct EstimationOptions {
  double alpha = 0.05;
  std::int64_t mcReps = 100'000;
  Summary summary = Summary::Both;
  GibbsConfig chain = GibbsConfig::simulation();
  ModeConfig mode;
  unsigned threads = 1;
  double selectionThreshold = 0.1;
  int maxAttempts = 1000;
};

/// Metrics for one estimator; NaN where the summary was not computed.
struct ArmMetrics {
  double mseMean = std::numeric_limits<double>::quiet_NaN();
  double mseMode = std::numeric_limits<double>::quiet_NaN();
  double zeroAgreement = std::numeric_limits<double>::quiet_NaN();
  double farFraction = std::numeric_limits<double>::quiet_NaN();
  double sparsity = std::numeric_limits<double>::quiet_NaN();
  double minEss = std::numeric_limits<double>::quiet_NaN();
};

struct EstimationRow {
  int replicate = 0;
  int regenerations = 0;  ///< boundary datasets discarded before this one
  bool failed = false;
  std::string error;
  TestKind kind = TestKind::Ols;
  double statistic = 0.0;
  bool reject = false;
  double qHat = 1.0;
  double kurtosisHat = 6.0;
  double sigma2Hat = 0.0;
  double tau2Hat = 0.0;
  ArmMetrics laplace;   ///< q = 1
  ArmMetrics ungated;   ///< q = q_hat regardless of the test
  ArmMetrics adaptive;  ///< ungated on rejection, laplace otherwise
};

struct EstimationReport {
  Scenario scenario;
  EstimationOptions options;
  std::vector<EstimationRow> rows;
  int completed = 0;
  int failures = 0;
  int regenerations = 0;
  double rejectionRate = 0.0;

  std::vector<double> column(double ArmMetrics::*field, ArmMetrics EstimationRow::*arm) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (!r.failed) out.push_back(r.*arm.*field);
    return out;
  }

  /// Fraction of completed replicates where `arm` has strictly larger posterior-mean MSE than Laplace.
  double fraction_worse_than_laplace(ArmMetrics EstimationRow::*arm) const {
    int worse = 0;
    for (const auto& r : rows)
      if (!r.failed && (r.*arm).mseMean > r.laplace.mseMean) ++worse;
    return completed ? static_cast<double>(worse) / completed : 0.0;
  }

  double fraction_better_than_laplace(ArmMetrics EstimationRow::*arm) const {
    int better = 0;
    for (const auto& r : rows)
      if (!r.failed && (r.*arm).mseMean < r.laplace.mseMean) ++better;
    return completed ? static_cast<double>(better) / completed : 0.0;
  }

  double median_mse_ratio(ArmMetrics EstimationRow::*arm) const {
    std::vector<double> ratios;
    for (const auto& r : rows)
      if (!r.failed) ratios.push_back((r.*arm).mseMean / r.laplace.mseMean);
    if (ratios.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(ratios.begin(), ratios.end());
    const std::size_t m = ratios.size() / 2;
    return ratios.size() % 2 ? ratios[m] : 0.5 * (ratios[m - 1] + ratios[m]);
  }
};

namespace detail {

inline ArmMetrics arm_metrics(const Vector& truth, const PriorFit& fit, double threshold) {
  ArmMetrics m;
  if (fit.posteriorMean) {
    m.mseMean = mse(truth, *fit.posteriorMean);
    m.minEss = fit.draws->min_ess();
  }
  if (fit.mode) {
    m.mseMode = mse(truth, fit.mode->beta);
    m.zeroAgreement = zero_agreement(truth, fit.mode->beta);
    m.farFraction = far_fraction(truth, fit.mode->beta, threshold);
    m.sparsity = fit.mode->sparsityRate;
  }
  return m;
}

}  // namespace detail

inline EstimationReport run_estimation_scenario(const Scenario& s, const EstimationOptions& opt, NullCache& cache) {
  const ScenarioContext ctx = prepare_scenario(s, cache);
  EstimationReport report;
  report.scenario = s;
  report.options = opt;
  report.options.chain.observer = nullptr;
  report.rows.resize(static_cast<std::size_t>(s.replicates));
  parallel_for(report.rows.size(), opt.threads, [&](std::size_t r) {
    EstimationRow& row = report.rows[r];
    const int rep = static_cast<int>(r);
    row.replicate = rep;
    try {
      for (int attempt = 0;; ++attempt) {
        if (attempt >= opt.maxAttempts) throw OptimizationError("too many boundary variance estimates");
        SimulatedData sim = simulate_replicate(s, rep, attempt, ctx.X ? &*ctx.X : nullptr);
        auto [plan, null] = replicate_plan(s, ctx, sim.data.X, rep, opt.mcReps);
        const AdaptiveResult prep = adaptive_prepare(sim.data, plan, *null, opt.alpha, false);
        if (prep.status == AdaptiveStatus::Boundary) {
          ++row.regenerations;
          continue;
        }
        row.kind = prep.test.kind;
        row.statistic = prep.test.statistic;
        row.reject = prep.test.reject;
        row.qHat = prep.shape.q;
        row.kurtosisHat = prep.shape.kurtosis;
        row.sigma2Hat = prep.variances.sigma2Hat;
        row.tau2Hat = prep.variances.tau2Hat;
        const std::uint64_t fitSeed =
            derive_seed(s.seed, {streams::kFit, scenario_key(s), static_cast<std::uint64_t>(rep)});
        const PriorFit laplace = fit_prior(sim.data, EpPrior(row.tau2Hat, 1.0), row.sigma2Hat, opt.summary,
                                           opt.chain, opt.mode, fitSeed, 1);
        const PriorFit ep = fit_prior(sim.data, EpPrior(row.tau2Hat, row.qHat), row.sigma2Hat, opt.summary,
                                      opt.chain, opt.mode, fitSeed, 1);
        row.laplace = detail::arm_metrics(sim.beta, laplace, opt.selectionThreshold);
        row.ungated = detail::arm_metrics(sim.beta, ep, opt.selectionThreshold);
        row.adaptive = row.reject ? row.ungated : row.laplace;
        break;
      }
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  int rejected = 0;
  for (const auto& row : report.rows) {
    report.regenerations += row.regenerations;
    if (row.failed) {
      ++report.failures;
      continue;
    }
    ++report.completed;
    rejected += row.reject ? 1 : 0;
  }
  if (report.completed) report.rejectionRate = static_cast<double>(rejected) / report.completed;
  return report;
}

inline std::vector<EstimationReport> run_estimation_study(const std::vector<Scenario>& scenarios,
                                                          const EstimationOptions& opt) {
  if (scenarios.empty()) throw DomainError("estimation study needs at least one scenario");
  NullCache cache(opt.mcReps, opt.threads);
  std::vector<EstimationReport> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) out.push_back(run_estimation_scenario(s, opt, cache));
  return out;
}

}  // namespace eptest
