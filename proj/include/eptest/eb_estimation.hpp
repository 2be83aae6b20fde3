#pragma once

// Moment-based empirical Bayes estimates of (sigma2, tau2) and q.
//
// (tau2, sigma2) minimize
//   L(tau2, sigma2) = log|XX' tau2 + I sigma2| + y'(XX' tau2 + I sigma2)^-1 y,
// evaluated through the spectrum XX' = U diag(lambda) U' as
//   sum_i log(lambda_i tau2 + sigma2) + w_i^2 / (lambda_i tau2 + sigma2),  w = U'y.
// For a fixed ratio rho = tau2/sigma2 the optimal sigma2 is closed form, which
// leaves a one-dimensional search over log rho.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "eptest/distributions.hpp"
#include "eptest/errors.hpp"
#include "eptest/regression_data.hpp"
#include "eptest/testing.hpp"

namespace eptest {

/// Nonzero spectrum of XX' with the matching squared projections of y, plus
/// the total squared projection onto the null space of XX'.
struct MarginalSpectrum {
  Vector lambda;       ///< positive eigenvalues of XX'
  Vector w2;           ///< (u_i'y)^2 for each positive eigenvalue
  Eigen::Index n = 0;  ///< number of observations
  double nullW2 = 0.0; ///< squared norm of y projected onto ker(XX')

  Eigen::Index null_dim() const { return n - lambda.size(); }
};

inline MarginalSpectrum marginal_spectrum(const RegressionData& data) {
  validate(data);
  MarginalSpectrum s;
  s.n = data.n();
  const double yy = data.y.squaredNorm();
  constexpr double kRelTol = 1e-12;
  if (data.n() <= data.p()) {
    const Matrix xxt = data.X * data.X.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(xxt);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of XX' failed");
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const Vector w = eig.eigenvectors().transpose() * data.y;
    std::vector<double> lam, w2;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (eig.eigenvalues()(i) > kRelTol * top) {
        lam.push_back(eig.eigenvalues()(i));
        w2.push_back(w(i) * w(i));
      } else {
        s.nullW2 += w(i) * w(i);
      }
    }
    s.lambda = Eigen::Map<Vector>(lam.data(), static_cast<Eigen::Index>(lam.size()));
    s.w2 = Eigen::Map<Vector>(w2.data(), static_cast<Eigen::Index>(w2.size()));
  } else {
    // XX' shares its nonzero spectrum with X'X; u_i = X v_i / sqrt(lambda_i).
    const Matrix xtx = detail::gram(data.X);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(xtx);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of X'X failed");
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const Vector xty = data.X.transpose() * data.y;
    const Vector proj = eig.eigenvectors().transpose() * xty;
    std::vector<double> lam, w2;
    double captured = 0.0;
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
      const double l = eig.eigenvalues()(i);
      if (l > kRelTol * top) {
        lam.push_back(l);
        w2.push_back(proj(i) * proj(i) / l);
        captured += w2.back();
      }
    }
    s.lambda = Eigen::Map<Vector>(lam.data(), static_cast<Eigen::Index>(lam.size()));
    s.w2 = Eigen::Map<Vector>(w2.data(), static_cast<Eigen::Index>(w2.size()));
    s.nullW2 = std::max(0.0, yy - captured);
  }
  return s;
}

inline double variance_objective(double tau2, double sigma2, const MarginalSpectrum& s) {
  if (tau2 < 0.0 || sigma2 < 0.0 || !std::isfinite(tau2) || !std::isfinite(sigma2)) {
    throw DomainError("variance components must be finite and >= 0");
  }
  if (sigma2 == 0.0 && (tau2 == 0.0 || s.null_dim() > 0)) {
    throw DomainError("XX' tau2 + I sigma2 is not positive definite");
  }
  double value = 0.0;
  for (Eigen::Index i = 0; i < s.lambda.size(); ++i) {
    const double c = s.lambda(i) * tau2 + sigma2;
    value += std::log(c) + s.w2(i) / c;
  }
  if (s.null_dim() > 0) {
    value += static_cast<double>(s.null_dim()) * std::log(sigma2) + s.nullW2 / sigma2;
  }
  return value;
}

inline double variance_objective(double tau2, double sigma2, const RegressionData& data) {
  return variance_objective(tau2, sigma2, marginal_spectrum(data));
}

struct VarianceEstimates {
  double sigma2Hat = 0.0;
  double tau2Hat = 0.0;
  bool atBoundary = false;
  double objectiveValue = 0.0;
};

namespace detail {

/// sigma2 minimizing the objective at fixed rho = tau2 / sigma2.
inline double profile_sigma2(double rho, const MarginalSpectrum& s) {
  double acc = s.nullW2;
  for (Eigen::Index i = 0; i < s.lambda.size(); ++i) acc += s.w2(i) / (s.lambda(i) * rho + 1.0);
  return acc / static_cast<double>(s.n);
}

inline double profile_objective(double log_rho, const MarginalSpectrum& s) {
  const double rho = std::exp(log_rho);
  const double sigma2 = profile_sigma2(rho, s);
  double value = static_cast<double>(s.n) * (std::log(sigma2) + 1.0);
  for (Eigen::Index i = 0; i < s.lambda.size(); ++i) value += std::log1p(s.lambda(i) * rho);
  return value;
}

}  // namespace detail

/// Search range for log(tau2 / sigma2).
inline constexpr double kLogRhoMin = -12.0;
inline constexpr double kLogRhoMax = 12.0;

inline VarianceEstimates estimate_variances(const MarginalSpectrum& s) {
  const double yy = s.w2.sum() + s.nullW2;
  if (!(yy > 0.0)) throw DegenerateInputError("response is identically zero");
  if (s.lambda.size() == 0) throw DegenerateInputError("design matrix is identically zero");

  // Coarse scan, then golden-section refinement around the best grid point.
  constexpr int kGrid = 240;
  const double step = (kLogRhoMax - kLogRhoMin) / kGrid;
  int best = 0;
  double bestValue = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kGrid; ++k) {
    const double v = detail::profile_objective(kLogRhoMin + k * step, s);
    if (v < bestValue) {
      bestValue = v;
      best = k;
    }
  }
  double a = kLogRhoMin + std::max(0, best - 1) * step;
  double b = kLogRhoMin + std::min(kGrid, best + 1) * step;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = detail::profile_objective(c, s);
  double fd = detail::profile_objective(d, s);
  for (int iter = 0; iter < 200 && b - a > 1e-12; ++iter) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - invphi * (b - a);
      fc = detail::profile_objective(c, s);
    } else {
      a = c; c = d; fc = fd;
      d = a + invphi * (b - a);
      fd = detail::profile_objective(d, s);
    }
  }
  double logRho = 0.5 * (a + b);
  const double interior = detail::profile_objective(logRho, s);
  if (!std::isfinite(interior)) {
    throw OptimizationError("variance objective is not finite at log rho = " + std::to_string(logRho));
  }

  VarianceEstimates est;
  const double rho = std::exp(logRho);
  est.sigma2Hat = detail::profile_sigma2(rho, s);
  est.tau2Hat = rho * est.sigma2Hat;
  est.objectiveValue = variance_objective(est.tau2Hat, est.sigma2Hat, s);

  // rho = 0: tau2 = 0, sigma2 = y'y / n.
  {
    const double sigma2 = yy / static_cast<double>(s.n);
    const double v = variance_objective(0.0, sigma2, s);
    if (v < est.objectiveValue) est = {sigma2, 0.0, true, v};
  }
  // rho = infinity: sigma2 = 0, only admissible when XX' is nonsingular.
  if (s.null_dim() == 0) {
    double tau2 = 0.0;
    for (Eigen::Index i = 0; i < s.lambda.size(); ++i) tau2 += s.w2(i) / s.lambda(i);
    tau2 /= static_cast<double>(s.n);
    if (tau2 > 0.0) {
      const double v = variance_objective(tau2, 0.0, s);
      if (v < est.objectiveValue) est = {0.0, tau2, true, v};
    }
  }
  return est;
}

inline VarianceEstimates estimate_variances(const RegressionData& data) {
  return estimate_variances(marginal_spectrum(data));
}

struct ShapeEstimate {
  double q = 1.0;
  double kurtosis = 6.0;     ///< kurtosis fed to the inverse map, after clamping
  double rawKurtosis = 6.0;  ///< psi(b_ols) or the bias-corrected ridge value
  double statistic = 6.0;    ///< uncorrected psi
  bool clamped = false;
  TestKind kind = TestKind::Ols;
};

/// Kurtosis-to-shape step shared by both statistics.
inline ShapeEstimate shape_from_kurtosis(double statistic, double kurt, TestKind kind) {
  ShapeEstimate est;
  est.kind = kind;
  est.statistic = statistic;
  est.rawKurtosis = kurt;
  if (!std::isfinite(kurt)) throw DegenerateInputError("kurtosis estimate is not finite");
  est.clamped = kurt < kKurtosisFloor;
  est.kurtosis = est.clamped ? kKurtosisFloor : kurt;
  est.q = solve_q_from_kurtosis(est.kurtosis);
  return est;
}

/// q from psi(b_ols) directly, or from the bias-corrected psi(b_delta).
inline ShapeEstimate estimate_q(const RegressionData& data, const TestPlan& plan) {
  const double statistic = test_statistic(data, plan);
  if (plan.kind == TestKind::Ols) return shape_from_kurtosis(statistic, statistic, plan.kind);
  const BiasConstants k = bias_constants(plan.gram, plan.decomp);
  return shape_from_kurtosis(statistic, corrected_kurtosis(statistic, k), plan.kind);
}

inline ShapeEstimate estimate_q(const RegressionData& data, TestKind kind) {
  TestPlan plan = plan_test(data.X);
  if (kind != plan.kind) {
    if (kind == TestKind::Oracle) throw DomainError("estimate_q needs the ols or ridge statistic");
    plan.kind = kind;
    plan.decomp = DesignDecomposition::from_gram(
        plan.gram, kind == TestKind::Ols ? std::optional<double>(0.0) : std::nullopt);
  }
  return estimate_q(data, plan);
}

}  // namespace eptest
