#pragma once

// Kurtosis test of H: q = 1 (Laplace prior) against exponential power alternatives.
//
// The statistic is psi(b) = m4(b) / m2(b)^2 evaluated on the true coefficients
// (oracle), the OLS estimate, or the ridge estimate
//   b_delta = V^-1 (C + delta2 I)^-1 V^-1 X'y,   X'X = V C V.
// Null quantiles come from Monte Carlo draws of psi(b*) with b* i.i.d. Laplace,
// mapped through E[b_delta | b] = V^-1 (C + delta2 I)^-1 C V b on the ridge path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eptest/errors.hpp"
#include "eptest/regression_data.hpp"
#include "eptest/rng.hpp"

namespace eptest {

enum class TestKind { Oracle, Ols, Ridge };

inline const char* to_string(TestKind kind) {
  switch (kind) {
    case TestKind::Oracle: return "oracle";
    case TestKind::Ols: return "ols";
    case TestKind::Ridge: return "ridge";
  }
  return "unknown";
}

/// Reciprocal condition number of X'X below which the ridge statistic is used.
inline constexpr double kRidgeDispatchRcond = 1e-5;
/// Eigenvalues of C below this are treated as exact zeros.
inline constexpr double kEigenClamp = 1e-12;
inline constexpr std::int64_t kDefaultMcReps = 1'000'000;

// ---------------------------------------------------------------------------
// The statistic

template <typename Derived>
double psi(const Eigen::DenseBase<Derived>& beta) {
  if (beta.size() < 2) throw DomainError("psi needs at least 2 coefficients");
  double m2 = 0.0;
  double m4 = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double b2 = static_cast<double>(beta(j)) * static_cast<double>(beta(j));
    m2 += b2;
    m4 += b2 * b2;
  }
  if (!(m2 > 0.0)) throw DegenerateInputError("psi is undefined for an all-zero vector");
  const double p = static_cast<double>(beta.size());
  m2 /= p;
  m4 /= p;
  return m4 / (m2 * m2);
}

inline double psi(std::span<const double> beta) {
  return psi(Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size())));
}

/// k-th empirical moment (1/p) sum b_j^k.
template <typename Derived>
double empirical_moment(const Eigen::DenseBase<Derived>& beta, int k) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) acc += std::pow(static_cast<double>(beta(j)), k);
  return acc / static_cast<double>(beta.size());
}

// ---------------------------------------------------------------------------
// Design decomposition X'X = V C V

inline double choose_delta2(const Vector& eta) {
  if (eta.size() == 0) throw DomainError("choose_delta2: empty eigenvalue vector");
  return std::max(0.0, 1.0 - eta.minCoeff());
}

struct DesignDecomposition {
  Vector v;           ///< diagonal of V, sqrt(diag(X'X))
  Matrix C;           ///< correlation-like matrix, X'X = V C V
  Vector eta;         ///< eigenvalues of C, descending, clamped at kEigenClamp
  Matrix eigvecs;     ///< eigenvectors of C, columns aligned with eta
  double delta2 = 0;  ///< ridge constant

  Eigen::Index p() const { return v.size(); }

  /// Decomposes a Gram matrix. delta2 follows the (1 - min eta)_+ rule unless given.
  static DesignDecomposition from_gram(const Matrix& gram, std::optional<double> delta2 = std::nullopt) {
    if (gram.rows() != gram.cols() || gram.rows() < 1) throw DomainError("Gram matrix must be square");
    DesignDecomposition d;
    d.v = gram.diagonal().cwiseSqrt();
    for (Eigen::Index j = 0; j < d.v.size(); ++j) {
      if (!(d.v(j) > 0.0)) throw DegenerateInputError("column " + std::to_string(j) + " of X is identically zero");
    }
    const Vector vinv = d.v.cwiseInverse();
    d.C = vinv.asDiagonal() * gram * vinv.asDiagonal();
    d.C = 0.5 * (d.C + d.C.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(d.C);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of C failed");
    const Eigen::Index p = d.C.rows();
    d.eta.resize(p);
    d.eigvecs.resize(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double value = eig.eigenvalues()(p - 1 - j);
      d.eta(j) = value < kEigenClamp ? 0.0 : value;
      d.eigvecs.col(j) = eig.eigenvectors().col(p - 1 - j);
    }
    d.delta2 = delta2 ? *delta2 : choose_delta2(d.eta);
    if (d.delta2 < 0.0 || !std::isfinite(d.delta2)) throw DomainError("delta2 must be finite and >= 0");
    return d;
  }

  static DesignDecomposition from_design(const Matrix& X, std::optional<double> delta2 = std::nullopt) {
    return from_gram(X.transpose() * X, delta2);
  }

  /// Q f(eta) Q' for an elementwise spectral function f.
  template <typename Fn>
  Matrix spectral(Fn&& fn) const {
    Vector values(eta.size());
    for (Eigen::Index j = 0; j < eta.size(); ++j) values(j) = fn(eta(j));
    return eigvecs * values.asDiagonal() * eigvecs.transpose();
  }

  void require_invertible() const {
    if (delta2 == 0.0 && eta.minCoeff() <= 0.0) {
      throw NotIdentifiableError("C + delta2 I is singular (delta2 = 0 with a rank-deficient design)");
    }
  }

  /// (C + delta2 I)^-1
  Matrix shifted_inverse() const {
    require_invertible();
    return spectral([&](double e) { return 1.0 / (e + delta2); });
  }

  /// D = V^-1 (C + delta2 I)^-1 V^-1
  Matrix D() const {
    const Vector vinv = v.cwiseInverse();
    return vinv.asDiagonal() * shifted_inverse() * vinv.asDiagonal();
  }

  /// Linear map b -> E[b_delta | b] = V^-1 (C + delta2 I)^-1 C V b.
  Matrix mean_map() const {
    require_invertible();
    const Vector vinv = v.cwiseInverse();
    return vinv.asDiagonal() * spectral([&](double e) { return e / (e + delta2); }) * v.asDiagonal();
  }

  /// Sigma_delta = V^-1 (C + delta2 I)^-1 C (C + delta2 I)^-1 V^-1, the noise covariance of b_delta / sigma^2.
  Matrix sigma_delta() const {
    require_invertible();
    const Vector vinv = v.cwiseInverse();
    return vinv.asDiagonal() * spectral([&](double e) { return e / ((e + delta2) * (e + delta2)); }) *
           vinv.asDiagonal();
  }

  Matrix reconstruct_gram() const { return v.asDiagonal() * C * v.asDiagonal(); }
};

// ---------------------------------------------------------------------------
// Estimates

namespace detail {

inline Matrix gram(const Matrix& X) {
  Matrix g = Matrix::Zero(X.cols(), X.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

/// Reciprocal condition number of a symmetric PSD matrix from its spectrum.
inline double spd_rcond(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0)) return 0.0;
  return std::max(0.0, lo) / hi;
}

inline Vector ols_from_gram(const Matrix& g, const Vector& xty) {
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) {
    throw NotIdentifiableError("X'X is not positive definite; use the ridge statistic instead");
  }
  Vector beta = llt.solve(xty);
  beta += llt.solve(xty - g * beta);  // one refinement step
  return beta;
}

}  // namespace detail

/// Minimum reciprocal condition of X'X for which OLS is attempted at all.
inline constexpr double kOlsSingularRcond = 1e-13;

/// Solves the normal equations. Throws NotIdentifiableError when X'X is rank deficient.
inline Vector ols_estimate(const RegressionData& data) {
  validate(data);
  if (data.n() < data.p()) {
    throw NotIdentifiableError("OLS is not identifiable with n < p; use the ridge statistic instead");
  }
  const Matrix g = detail::gram(data.X);
  if (detail::spd_rcond(g) < kOlsSingularRcond) {
    throw NotIdentifiableError("X'X is numerically rank deficient; use the ridge statistic instead");
  }
  return detail::ols_from_gram(g, data.X.transpose() * data.y);
}

inline Vector ridge_estimate(const RegressionData& data, const DesignDecomposition& decomp) {
  validate(data);
  if (decomp.p() != data.p()) throw DomainError("decomposition does not match the design");
  return decomp.D() * (data.X.transpose() * data.y);
}

// ---------------------------------------------------------------------------
// Bias constants for the ridge-path kurtosis estimate

struct BiasConstants {
  double alpha = 1.0;
  double gammaConst = 1.0;
  double omega = 0.0;
};

/// alpha = tr(G D^2 G)/p, gamma = sum_jk (D G)_jk^4 / p,
/// omega = 3 (sum_j (G D^2 G)_jj^2 / p - gamma), with G = X'X.
inline BiasConstants bias_constants(const Matrix& gram, const DesignDecomposition& decomp) {
  const Matrix A = decomp.D() * gram;
  const double p = static_cast<double>(gram.rows());
  BiasConstants k;
  // (G D^2 G) = A'A, so its diagonal holds the squared column norms of A.
  const Vector diag = A.colwise().squaredNorm().transpose();
  k.alpha = diag.sum() / p;
  k.gammaConst = A.array().square().square().sum() / p;
  k.omega = 3.0 * (diag.squaredNorm() / p - k.gammaConst);
  return k;
}

inline BiasConstants bias_constants(const RegressionData& data, const DesignDecomposition& decomp) {
  return bias_constants(detail::gram(data.X), decomp);
}

/// (alpha^2 / gamma) (psi - omega / alpha^2)
inline double corrected_kurtosis(double statistic, const BiasConstants& k) {
  if (!(k.gammaConst > 0.0)) throw DomainError("bias constant gamma must be > 0");
  if (!(k.alpha > 0.0)) throw DomainError("bias constant alpha must be > 0");
  const double a2 = k.alpha * k.alpha;
  return (a2 / k.gammaConst) * (statistic - k.omega / a2);
}

// ---------------------------------------------------------------------------
// Monte Carlo null distribution

/// Sorted Monte Carlo sample of psi under the Laplace null.
class NullDistribution {
public:
  NullDistribution() = default;
  explicit NullDistribution(std::vector<double> samples) : samples_(std::move(samples)) {
    std::sort(samples_.begin(), samples_.end());
  }

  std::size_t size() const noexcept { return samples_.size(); }
  const std::vector<double>& samples() const noexcept { return samples_; }

  /// Order-statistic quantile with linear interpolation between neighbours.
  double quantile(double prob) const {
    if (samples_.empty()) throw DomainError("empty null distribution");
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability must lie in [0, 1]");
    const double h = prob * static_cast<double>(samples_.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, samples_.size() - 1);
    return samples_[lo] + (h - static_cast<double>(lo)) * (samples_[hi] - samples_[lo]);
  }

  /// Fraction of null draws <= statistic.
  double cdf(double statistic) const {
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), statistic);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
  }

private:
  std::vector<double> samples_;
};

struct NullOptions {
  std::int64_t mcReps = kDefaultMcReps;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double laplaceScale = 1.0;  ///< any scale gives the same psi; 1 is canonical
};

inline constexpr std::size_t kNullBlock = 1024;

/// Simulates psi(M b*) (or psi(b*) when meanMap is null) for b* i.i.d. Laplace.
/// Replicates are generated in fixed blocks, each with its own substream.
inline NullDistribution simulate_null(const Matrix* meanMap, Eigen::Index p, const NullOptions& opt) {
  if (opt.mcReps < 1000) throw DomainError("null simulation needs at least 1000 replicates");
  if (p < 2) throw DomainError("null simulation needs p >= 2");
  if (meanMap && (meanMap->rows() != p || meanMap->cols() != p)) throw DomainError("mean map has wrong size");
  const auto reps = static_cast<std::size_t>(opt.mcReps);
  const std::size_t blocks = (reps + kNullBlock - 1) / kNullBlock;
  std::vector<double> out(reps);
  parallel_for(blocks, opt.threads, [&](std::size_t b) {
    Rng rng = substream(opt.seed, {streams::kNull, static_cast<std::uint64_t>(b)});
    std::exponential_distribution<double> expo(1.0 / opt.laplaceScale);
    const std::size_t begin = b * kNullBlock;
    const std::size_t end = std::min(reps, begin + kNullBlock);
    const auto rows = static_cast<Eigen::Index>(end - begin);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> draws(rows, p);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const double e = expo(rng);
        draws(r, j) = (rng() & 1ULL) ? e : -e;
      }
    }
    if (meanMap) {
      const Matrix mapped = draws * meanMap->transpose();
      for (Eigen::Index r = 0; r < rows; ++r) out[begin + static_cast<std::size_t>(r)] = psi(mapped.row(r));
    } else {
      for (Eigen::Index r = 0; r < rows; ++r) out[begin + static_cast<std::size_t>(r)] = psi(draws.row(r));
    }
  });
  return NullDistribution(std::move(out));
}

/// (alpha/2, 1 - alpha/2) null quantiles; decomp == nullptr selects the oracle/OLS null.
inline std::pair<double, double> null_quantiles(const DesignDecomposition* decomp, Eigen::Index p, double alpha,
                                                const NullOptions& opt) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  std::optional<Matrix> map;
  if (decomp) map = decomp->mean_map();
  const NullDistribution null = simulate_null(map ? &*map : nullptr, p, opt);
  return {null.quantile(alpha / 2.0), null.quantile(1.0 - alpha / 2.0)};
}

// ---------------------------------------------------------------------------
// The test

struct TestOutcome {
  double statistic = 0.0;
  double lowerQuantile = 0.0;
  double upperQuantile = 0.0;
  bool reject = false;
  double nullTailProb = 0.0;  ///< Pr(psi* <= statistic | q = 1)
  TestKind kind = TestKind::Ols;
  std::int64_t mcReps = 0;
  double alpha = 0.05;
  double delta2 = 0.0;
  double boundSurrogate = 0.0;  ///< tr((X'X)^-1)/p or tr(Sigma_delta)/p
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::vector<std::string> warnings;
};

/// Everything about a design needed to run the test, computed once per X.
struct TestPlan {
  TestKind kind = TestKind::Ols;
  Matrix gram;
  DesignDecomposition decomp;
  double rcond = 0.0;
  double boundSurrogate = 0.0;

  /// Mean map for the null simulation; empty on the OLS path.
  std::optional<Matrix> null_map() const {
    if (kind == TestKind::Ridge) return decomp.mean_map();
    return std::nullopt;
  }
};

/// Chooses OLS when n > p and rcond(X'X) >= 1e-5, otherwise ridge with the recommended delta2.
inline TestPlan plan_test(const Matrix& X) {
  if (X.cols() < 2) throw DomainError("the test needs p >= 2");
  TestPlan plan;
  plan.gram = detail::gram(X);
  plan.rcond = detail::spd_rcond(plan.gram);
  const bool ols = X.rows() > X.cols() && plan.rcond >= kRidgeDispatchRcond;
  plan.kind = ols ? TestKind::Ols : TestKind::Ridge;
  plan.decomp = DesignDecomposition::from_gram(plan.gram, ols ? std::optional<double>(0.0) : std::nullopt);
  const double p = static_cast<double>(X.cols());
  if (ols) {
    const Vector vinv2 = plan.decomp.v.cwiseInverse().cwiseAbs2();
    const Matrix cinv = plan.decomp.shifted_inverse();
    plan.boundSurrogate = (cinv.diagonal().cwiseProduct(vinv2)).sum() / p;
  } else {
    plan.boundSurrogate = plan.decomp.sigma_delta().trace() / p;
  }
  return plan;
}

inline NullDistribution simulate_null(const TestPlan& plan, const NullOptions& opt) {
  const auto map = plan.null_map();
  return simulate_null(map ? &*map : nullptr, plan.decomp.p(), opt);
}

inline TestOutcome decide(double statistic, const NullDistribution& null, double alpha, TestKind kind) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  TestOutcome out;
  out.statistic = statistic;
  out.kind = kind;
  out.alpha = alpha;
  out.mcReps = static_cast<std::int64_t>(null.size());
  out.lowerQuantile = null.quantile(alpha / 2.0);
  out.upperQuantile = null.quantile(1.0 - alpha / 2.0);
  out.reject = !(statistic > out.lowerQuantile && statistic < out.upperQuantile);
  out.nullTailProb = null.cdf(statistic);
  return out;
}

/// The oracle test on observed coefficients.
inline TestOutcome oracle_test(const Vector& beta, const NullDistribution& null, double alpha) {
  TestOutcome out = decide(psi(beta), null, alpha, TestKind::Oracle);
  out.p = beta.size();
  return out;
}

/// The statistic psi(b_ols) or psi(b_delta) for a planned design.
inline double test_statistic(const RegressionData& data, const TestPlan& plan) {
  if (plan.kind == TestKind::Ols) {
    return psi(detail::ols_from_gram(plan.gram, data.X.transpose() * data.y));
  }
  return psi(ridge_estimate(data, plan.decomp));
}

inline TestOutcome laplace_test(const RegressionData& data, const TestPlan& plan, const NullDistribution& null,
                                double alpha) {
  validate(data);
  if (!(data.y.squaredNorm() > 0.0)) throw DegenerateInputError("response is identically zero");
  TestOutcome out = decide(test_statistic(data, plan), null, alpha, plan.kind);
  out.delta2 = plan.kind == TestKind::Ridge ? plan.decomp.delta2 : 0.0;
  out.boundSurrogate = plan.boundSurrogate;
  out.n = data.n();
  out.p = data.p();
  if (column_norm_deviation(data.X) > 0.01) {
    out.warnings.emplace_back("design columns are not standardized to squared norm n (deviation > 1%)");
  }
  return out;
}

/// Plans, simulates the null with `opt`, and tests in one call.
inline TestOutcome laplace_test(const RegressionData& data, double alpha, const NullOptions& opt) {
  validate(data);
  if (!(data.y.squaredNorm() > 0.0)) throw DegenerateInputError("response is identically zero");
  const TestPlan plan = plan_test(data.X);
  const NullDistribution null = simulate_null(plan, opt);
  return laplace_test(data, plan, null, alpha);
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Leading term of the mean-squared error bound for the surrogate statistic:
/// 16 sigma2 m6(b)/m2(b)^4 tr((X'X)^-1)/p on the OLS path, and the same with
/// b_delta = E[b_delta | betaRef] and tr(Sigma_delta)/p on the ridge path.
inline double proposition_bound(const DesignDecomposition& decomp, const Vector& betaRef, double sigma2,
                                TestKind kind) {
  if (betaRef.size() != decomp.p()) throw DomainError("betaRef has the wrong length");
  if (sigma2 < 0.0) throw DomainError("sigma2 must be >= 0");
  const double p = static_cast<double>(decomp.p());
  Vector b = betaRef;
  double trace = 0.0;
  if (kind == TestKind::Ridge) {
    b = decomp.mean_map() * betaRef;
    trace = decomp.sigma_delta().trace();
  } else {
    DesignDecomposition ols = decomp;
    ols.delta2 = 0.0;
    trace = ols.sigma_delta().trace();
  }
  const double m2 = empirical_moment(b, 2);
  if (!(m2 > 0.0)) throw DegenerateInputError("proposition_bound: m2 of the reference vector is zero");
  const double m6 = empirical_moment(b, 6);
  return 16.0 * sigma2 * (m6 / std::pow(m2, 4)) * trace / p;
}

}  // namespace eptest
