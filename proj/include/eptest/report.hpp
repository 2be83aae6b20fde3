#pragma once

// JSON and CSV serialization of test reports, fits and simulation tables.
// Column sets are fixed; see README.md for the documented layouts.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "eptest/adaptive.hpp"
#include "eptest/simulation.hpp"
#include "eptest/testing.hpp"

#ifndef EPTEST_VERSION
#define EPTEST_VERSION "0.0.0"
#endif

namespace eptest {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = EPTEST_VERSION;

/// Non-finite values become JSON null.
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json to_json(const TestOutcome& t) {
  Json j;
  j["n"] = t.n;
  j["p"] = t.p;
  j["kind"] = to_string(t.kind);
  j["delta2"] = number(t.delta2);
  j["statistic"] = number(t.statistic);
  j["lowerQuantile"] = number(t.lowerQuantile);
  j["upperQuantile"] = number(t.upperQuantile);
  j["nullTailProb"] = number(t.nullTailProb);
  j["reject"] = t.reject;
  j["alpha"] = t.alpha;
  j["mcReps"] = t.mcReps;
  j["boundSurrogate"] = number(t.boundSurrogate);
  j["warnings"] = t.warnings;
  return j;
}

inline Json to_json(const VarianceEstimates& v) {
  return Json{{"sigma2", number(v.sigma2Hat)},
              {"tau2", number(v.tau2Hat)},
              {"atBoundary", v.atBoundary},
              {"objective", number(v.objectiveValue)}};
}

inline Json to_json(const ShapeEstimate& s) {
  return Json{{"q", number(s.q)},
              {"kurtosis", number(s.kurtosis)},
              {"rawKurtosis", number(s.rawKurtosis)},
              {"clamped", s.clamped}};
}

inline const char* prior_label(double q) { return q == 1.0 ? "laplace" : "exponential_power"; }

namespace detail {

inline void csv_value(std::ostream& out, double x) {
  if (std::isfinite(x)) {
    out << x;
  } else {
    out << "NA";
  }
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::ostream& precise(std::ostream& out) {
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

/// Per-coordinate fit table: name, mode, mean, q025, q975, ess.
inline void write_coefficients_csv(std::ostream& out, const std::vector<std::string>& names, const PriorFit& fit) {
  detail::precise(out);
  out << "name,mode,mean,q025,q975,ess\n";
  const Eigen::Index p = static_cast<Eigen::Index>(names.size());
  Vector lo, hi;
  if (fit.draws) {
    lo = fit.draws->quantile(0.025);
    hi = fit.draws->quantile(0.975);
  }
  const double na = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index j = 0; j < p; ++j) {
    out << detail::csv_field(names[static_cast<std::size_t>(j)]) << ',';
    detail::csv_value(out, fit.mode ? fit.mode->beta(j) : na);
    out << ',';
    detail::csv_value(out, fit.posteriorMean ? (*fit.posteriorMean)(j) : na);
    out << ',';
    detail::csv_value(out, fit.draws ? lo(j) : na);
    out << ',';
    detail::csv_value(out, fit.draws ? hi(j) : na);
    out << ',';
    detail::csv_value(out, fit.draws ? fit.draws->essPerCoordinate(j) : na);
    out << '\n';
  }
}

inline Json fit_summary_json(const AdaptiveResult& r, Summary summary) {
  Json j;
  j["status"] = r.status == AdaptiveStatus::Ok ? "ok" : "boundary";
  if (!r.message.empty()) j["message"] = r.message;
  j["test"] = to_json(r.test);
  j["variances"] = to_json(r.variances);
  j["shape"] = to_json(r.shape);
  j["qUsed"] = r.qUsed;
  j["prior"] = prior_label(r.qUsed);
  j["summary"] = to_string(summary);
  if (!r.fit) return j;
  const PriorFit& fit = *r.fit;
  if (fit.mode) {
    j["mode"] = Json{{"sparsityRate", fit.mode->sparsityRate},
                     {"objective", number(fit.mode->objective)},
                     {"iterations", fit.mode->iterations},
                     {"converged", fit.mode->converged},
                     {"restarts", fit.mode->restarts},
                     {"nonunique", fit.mode->nonunique},
                     {"warnings", fit.mode->warnings}};
  }
  if (fit.draws) {
    j["posterior"] = Json{{"iterations", fit.draws->iterations},
                          {"burnIn", fit.draws->burnIn},
                          {"thinning", fit.draws->thinning},
                          {"retained", fit.draws->draws.rows()},
                          {"minEss", number(fit.draws->min_ess())}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Simulation tables

inline Json truth_json(const Truth& truth) {
  if (const auto* ep = std::get_if<EpPrior>(&truth)) {
    return Json{{"family", "exponential_power"}, {"q", ep->q()}, {"tau2", ep->tau2()}};
  }
  const auto& ss = std::get<SpikeSlab>(truth);
  return Json{{"family", "spike_slab"}, {"pi", ss.pi}, {"tau2", ss.tau2}};
}

inline Json scenario_json(const Scenario& s) {
  return Json{{"label", describe(s)},
              {"n", s.n},
              {"p", s.p},
              {"truth", truth_json(s.truth)},
              {"sigma2", s.sigma2},
              {"replicates", s.replicates},
              {"seed", s.seed},
              {"fixedDesign", uses_fixed_design(s)}};
}

inline constexpr const char* kPowerColumns =
    "replicate,failed,kind,statistic,lower_quantile,upper_quantile,null_tail_prob,delta2,reject,error";

inline void write_power_csv(std::ostream& out, const PowerReport& r) {
  detail::precise(out);
  out << kPowerColumns << '\n';
  for (const auto& row : r.rows) {
    out << row.replicate << ',' << (row.failed ? 1 : 0) << ',';
    if (row.failed) {
      out << "NA,NA,NA,NA,NA,NA,NA," << detail::csv_field(row.error) << '\n';
      continue;
    }
    const auto& t = row.test;
    out << to_string(t.kind) << ',';
    detail::csv_value(out, t.statistic);
    out << ',';
    detail::csv_value(out, t.lowerQuantile);
    out << ',';
    detail::csv_value(out, t.upperQuantile);
    out << ',';
    detail::csv_value(out, t.nullTailProb);
    out << ',';
    detail::csv_value(out, t.delta2);
    out << ',' << (t.reject ? 1 : 0) << ",\n";
  }
}

inline constexpr const char* kPowerSummaryColumns =
    "label,n,p,family,q,pi,replicates,completed,failures,rejection_rate,standard_error";

inline void write_power_summary_csv(std::ostream& out, const std::vector<PowerReport>& reports) {
  detail::precise(out);
  out << kPowerSummaryColumns << '\n';
  for (const auto& r : reports) {
    const auto& s = r.scenario;
    out << detail::csv_field(describe(s)) << ',' << s.n << ',' << s.p << ',';
    if (const auto* ep = std::get_if<EpPrior>(&s.truth)) {
      out << "exponential_power," << ep->q() << ",NA,";
    } else {
      out << "spike_slab,NA," << std::get<SpikeSlab>(s.truth).pi << ',';
    }
    out << s.replicates << ',' << r.completed << ',' << r.failures << ',' << r.rejectionRate << ','
        << r.standardError << '\n';
  }
}

inline Json to_json(const PowerReport& r) {
  Json j = scenario_json(r.scenario);
  j["alpha"] = r.alpha;
  j["mcReps"] = r.mcReps;
  j["completed"] = r.completed;
  j["failures"] = r.failures;
  j["rejectionRate"] = r.rejectionRate;
  j["standardError"] = r.standardError;
  return j;
}

inline constexpr const char* kEstimationColumns =
    "replicate,regenerations,failed,kind,statistic,reject,q_hat,kurtosis_hat,sigma2_hat,tau2_hat,"
    "mse_mean_laplace,mse_mean_ungated,mse_mean_adaptive,"
    "mse_mode_laplace,mse_mode_ungated,mse_mode_adaptive,"
    "zero_agreement_laplace,zero_agreement_ungated,zero_agreement_adaptive,"
    "far_fraction_laplace,far_fraction_ungated,far_fraction_adaptive,"
    "sparsity_laplace,sparsity_ungated,min_ess_laplace,min_ess_ungated,error";

inline void write_estimation_csv(std::ostream& out, const EstimationReport& r) {
  detail::precise(out);
  out << kEstimationColumns << '\n';
  auto v = [&out](double x) {
    out << ',';
    detail::csv_value(out, x);
  };
  const double na = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : r.rows) {
    out << row.replicate << ',' << row.regenerations << ',' << (row.failed ? 1 : 0);
    if (row.failed) {
      out << ",NA";
      for (int k = 0; k < 22; ++k) v(na);
      out << ',' << detail::csv_field(row.error) << '\n';
      continue;
    }
    out << ',' << to_string(row.kind);
    v(row.statistic);
    out << ',' << (row.reject ? 1 : 0);
    v(row.qHat);
    v(row.kurtosisHat);
    v(row.sigma2Hat);
    v(row.tau2Hat);
    for (auto field : {&ArmMetrics::mseMean, &ArmMetrics::mseMode, &ArmMetrics::zeroAgreement,
                       &ArmMetrics::farFraction}) {
      v(row.laplace.*field);
      v(row.ungated.*field);
      v(row.adaptive.*field);
    }
    v(row.laplace.sparsity);
    v(row.ungated.sparsity);
    v(row.laplace.minEss);
    v(row.ungated.minEss);
    out << ",\n";
  }
}

inline Json to_json(const EstimationReport& r) {
  Json j = scenario_json(r.scenario);
  j["alpha"] = r.options.alpha;
  j["mcReps"] = r.options.mcReps;
  j["summary"] = to_string(r.options.summary);
  j["chain"] = Json{{"iterations", r.options.chain.iters},
                    {"burnIn", r.options.chain.burnIn},
                    {"thinning", r.options.chain.thinning}};
  j["selectionThreshold"] = r.options.selectionThreshold;
  j["completed"] = r.completed;
  j["failures"] = r.failures;
  j["regenerations"] = r.regenerations;
  j["rejectionRate"] = r.rejectionRate;
  if (wants_mean(r.options.summary)) {
    j["adaptiveWorseThanLaplace"] = r.fraction_worse_than_laplace(&EstimationRow::adaptive);
    j["ungatedWorseThanLaplace"] = r.fraction_worse_than_laplace(&EstimationRow::ungated);
    j["adaptiveBetterThanLaplace"] = r.fraction_better_than_laplace(&EstimationRow::adaptive);
    j["medianMseRatioAdaptive"] = number(r.median_mse_ratio(&EstimationRow::adaptive));
    j["medianMseRatioUngated"] = number(r.median_mse_ratio(&EstimationRow::ungated));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace eptest
