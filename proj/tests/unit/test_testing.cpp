#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "eptest/simulation.hpp"
#include "eptest/testing.hpp"
#include "oracles.hpp"

using namespace eptest;

namespace {

Matrix random_design(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_design(n, p, rng);
}

Matrix orthonormal_columns(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  const Eigen::HouseholderQR<Matrix> qr(random_design(n, p, seed));
  return qr.householderQ() * Matrix::Identity(n, p);
}

}  // namespace

TEST(Psi, HandValues) {
  EXPECT_DOUBLE_EQ(psi(Vector{{1, -1, 1, -1}}), 1.0);
  EXPECT_DOUBLE_EQ(psi(Vector{{0, 0, 0, 2}}), 4.0);
  const std::vector<double> v{0, 0, 0, 2};
  EXPECT_DOUBLE_EQ(psi(std::span<const double>(v)), 4.0);
  EXPECT_THROW(psi(Vector::Zero(5)), DegenerateInputError);
  EXPECT_THROW(psi(Vector{{3.0}}), DomainError);
}

TEST(Psi, ScaleInvariant) {
  Rng rng(4);
  const auto b = ep_sample(500, EpPrior(1.0, 0.7), rng);
  const Vector beta = Eigen::Map<const Vector>(b.data(), 500);
  for (double c : {-3.0, 1e-6, 2.0, 1e5}) {
    EXPECT_NEAR(psi(Vector(c * beta)), psi(beta), 1e-12 * psi(beta));
  }
}

TEST(Psi, LaplaceLargeSample) {
  Rng rng = substream(2, {7});
  const auto b = ep_sample(1'000'000, EpPrior(1.0, 1.0), rng);
  EXPECT_NEAR(psi(std::span<const double>(b)), 6.0, 0.1);
}

TEST(Decomposition, ReconstructsGram) {
  const Matrix X = random_design(40, 12, 1);
  const Matrix g = X.transpose() * X;
  const auto d = DesignDecomposition::from_gram(g);
  EXPECT_LE((d.reconstruct_gram() - g).norm() / g.norm(), 1e-10);
  for (Eigen::Index j = 1; j < d.eta.size(); ++j) EXPECT_GE(d.eta(j - 1), d.eta(j));
  EXPECT_DOUBLE_EQ(d.delta2, std::max(0.0, 1.0 - d.eta.minCoeff()));
}

TEST(Decomposition, OrthogonalDesign) {
  const Matrix X = orthonormal_columns(30, 8, 2) * std::sqrt(30.0);
  const auto d = DesignDecomposition::from_design(X);
  for (Eigen::Index j = 0; j < 8; ++j) EXPECT_NEAR(d.eta(j), 1.0, 1e-10);
  EXPECT_NEAR(d.delta2, 0.0, 1e-10);
}

TEST(Decomposition, ZeroColumnIsDegenerate) {
  Matrix X = random_design(10, 3, 3);
  X.col(1).setZero();
  EXPECT_THROW(DesignDecomposition::from_design(X), DegenerateInputError);
}

TEST(ChooseDelta2, Rule) {
  EXPECT_DOUBLE_EQ(choose_delta2(Vector::Ones(4)), 0.0);
  EXPECT_DOUBLE_EQ(choose_delta2(Vector{{2.0, 1.0, 0.0}}), 1.0);
  EXPECT_NEAR(choose_delta2(Vector{{1.6, 1.0, 0.4}}), 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(choose_delta2(Vector{{3.0, 1.5}}), 0.0);
}

TEST(OlsEstimate, IdentityDesign) {
  const Vector y{{1.5, -2.0, 0.25, 4.0}};
  const auto data = make_data(y, Matrix::Identity(4, 4));
  EXPECT_LE((ols_estimate(data) - y).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(OlsEstimate, NoiselessRecoveryAndResidual) {
  const Matrix X = random_design(60, 10, 5);
  Rng rng(6);
  const auto b = ep_sample(10, EpPrior(1.0, 1.0), rng);
  const Vector beta = Eigen::Map<const Vector>(b.data(), 10);
  const auto data = make_data(X * beta, X);
  EXPECT_LE((ols_estimate(data) - beta).lpNorm<Eigen::Infinity>(), 1e-8);

  Vector y = X * beta;
  std::normal_distribution<double> z;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += z(rng);
  const auto noisy = make_data(y, X);
  const Vector bh = ols_estimate(noisy);
  EXPECT_LE((X.transpose() * (y - X * bh)).norm(), 1e-8 * (X.transpose() * y).norm());
}

TEST(OlsEstimate, ErrorsWhenNotIdentifiable) {
  const Matrix X = random_design(5, 8, 7);
  EXPECT_THROW(ols_estimate(make_data(Vector::Ones(5), X)), NotIdentifiableError);
  Matrix Y = random_design(20, 4, 8);
  Y.col(3) = Y.col(0) + Y.col(1);
  EXPECT_THROW(ols_estimate(make_data(Vector::Ones(20), Y)), NotIdentifiableError);
}

TEST(OlsEstimate, MeanSquaredErrorMatchesTrace) {
  const Matrix X = random_design(200, 50, 9);
  const double trace = (X.transpose() * X).inverse().trace() / 50.0;
  Rng rng(10);
  std::normal_distribution<double> z;
  const Vector beta = Vector::LinSpaced(50, -1, 1);
  double acc = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    Vector y = X * beta;
    for (Eigen::Index i = 0; i < 200; ++i) y(i) += z(rng);
    acc += (ols_estimate(make_data(y, X)) - beta).squaredNorm() / 50.0;
  }
  EXPECT_NEAR(acc / reps / trace, 1.0, 0.05);
}

TEST(RidgeEstimate, IdentityDesignHalves) {
  const Vector y{{2.0, -4.0, 6.0}};
  const auto data = make_data(y, Matrix::Identity(3, 3));
  const auto d = DesignDecomposition::from_design(data.X, 1.0);
  EXPECT_LE((ridge_estimate(data, d) - y / 2).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(RidgeEstimate, ReducesToOls) {
  const Matrix X = orthonormal_columns(20, 5, 11);
  Rng rng(12);
  std::normal_distribution<double> z;
  Vector y(20);
  for (auto& v : y) v = z(rng);
  const auto data = make_data(y, X);
  const auto d = DesignDecomposition::from_design(X, 0.0);
  EXPECT_LE((ridge_estimate(data, d) - ols_estimate(data)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(RidgeEstimate, MatchesDenseInverse) {
  const Matrix X = random_design(6, 3, 13);
  const Vector y = Vector{{1, -2, 0.5, 3, 0, -1}};
  const auto data = make_data(y, X);
  const double delta2 = 0.37;
  const auto d = DesignDecomposition::from_design(X, delta2);
  const Matrix g = X.transpose() * X;
  const Vector v = g.diagonal().cwiseSqrt();
  const Matrix vinv = v.cwiseInverse().asDiagonal();
  const Matrix C = vinv * g * vinv;
  const Vector expected = vinv * (C + delta2 * Matrix::Identity(3, 3)).inverse() * vinv * X.transpose() * y;
  EXPECT_LE((ridge_estimate(data, d) - expected).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(RidgeEstimate, SingularAtZeroShift) {
  const Matrix X = random_design(4, 6, 14);
  const auto data = make_data(Vector::Ones(4), X);
  const auto d = DesignDecomposition::from_design(X, 0.0);
  EXPECT_THROW(ridge_estimate(data, d), NotIdentifiableError);
}

TEST(BiasConstants, IdentityDesign) {
  const Matrix I = Matrix::Identity(7, 7);
  const auto d = DesignDecomposition::from_gram(I, 0.0);
  const auto k = bias_constants(I, d);
  EXPECT_NEAR(k.alpha, 1.0, 1e-14);
  EXPECT_NEAR(k.gammaConst, 1.0, 1e-14);
  EXPECT_NEAR(k.omega, 0.0, 1e-14);
}

TEST(BiasConstants, MatchDefinitionOnDenseOracle) {
  const Matrix X = random_design(15, 20, 15);
  const Matrix g = X.transpose() * X;
  const auto d = DesignDecomposition::from_gram(g);
  const Vector v = g.diagonal().cwiseSqrt();
  const Matrix vinv = v.cwiseInverse().asDiagonal();
  const Matrix C = vinv * g * vinv;
  const Matrix D = vinv * (C + d.delta2 * Matrix::Identity(20, 20)).inverse() * vinv;
  const Matrix gdg = g * D * D * g;
  const Matrix dg = D * g;
  const double p = 20.0;
  const auto k = bias_constants(g, d);
  EXPECT_NEAR(k.alpha, gdg.trace() / p, 1e-9 * std::abs(k.alpha));
  EXPECT_NEAR(k.gammaConst, dg.array().pow(4).sum() / p, 1e-9 * k.gammaConst);
  EXPECT_NEAR(k.omega, 3.0 * (gdg.diagonal().array().square().sum() / p - dg.array().pow(4).sum() / p),
              1e-9 * (1 + std::abs(k.omega)));
}

TEST(CorrectedKurtosis, Identities) {
  EXPECT_DOUBLE_EQ(corrected_kurtosis(6.0, BiasConstants{1, 1, 0}), 6.0);
  EXPECT_DOUBLE_EQ(corrected_kurtosis(6.0, BiasConstants{2, 4, 0}), 6.0);
  EXPECT_DOUBLE_EQ(corrected_kurtosis(5.0, BiasConstants{1, 2, 1}), 2.0);
  EXPECT_THROW(corrected_kurtosis(6.0, BiasConstants{1, 0, 0}), DomainError);
  EXPECT_THROW(corrected_kurtosis(6.0, BiasConstants{1, -1, 0}), DomainError);
}

TEST(NullDistribution, QuantileAndCdf) {
  const NullDistribution null({4.0, 1.0, 3.0, 2.0, 5.0});
  EXPECT_DOUBLE_EQ(null.quantile(0.0), 1.0);
  EXPECT_DOUBLE_EQ(null.quantile(1.0), 5.0);
  EXPECT_DOUBLE_EQ(null.quantile(0.5), 3.0);
  EXPECT_DOUBLE_EQ(null.quantile(0.1), 1.4);
  EXPECT_DOUBLE_EQ(null.cdf(3.0), 0.6);
  EXPECT_DOUBLE_EQ(null.cdf(0.0), 0.0);
  EXPECT_THROW(null.quantile(1.5), DomainError);
}

TEST(NullQuantiles, BracketLaplaceKurtosis) {
  const auto [lo, hi] = null_quantiles(nullptr, 100, 0.05, NullOptions{200'000, 3, 1, 1.0});
  EXPECT_LT(lo, 6.0);
  EXPECT_GT(hi, 6.0);
  EXPECT_LT(lo, hi);
}

TEST(NullQuantiles, ScaleInvariantAndDeterministic) {
  NullOptions a{20'000, 17, 1, 1.0};
  NullOptions b = a;
  b.laplaceScale = 37.5;
  const auto qa = null_quantiles(nullptr, 50, 0.05, a);
  const auto qb = null_quantiles(nullptr, 50, 0.05, b);
  EXPECT_NEAR(qa.first, qb.first, 1e-12);
  EXPECT_NEAR(qa.second, qb.second, 1e-12);
  EXPECT_EQ(null_quantiles(nullptr, 50, 0.05, a), qa);
}

TEST(NullQuantiles, ThreadCountDoesNotMatter) {
  const Matrix X = random_design(30, 40, 18);
  const auto plan = plan_test(X);
  ASSERT_EQ(plan.kind, TestKind::Ridge);
  const auto one = simulate_null(plan, NullOptions{10'000, 5, 1, 1.0});
  const auto four = simulate_null(plan, NullOptions{10'000, 5, 4, 1.0});
  EXPECT_EQ(one.samples(), four.samples());
  EXPECT_THROW(simulate_null(nullptr, 10, NullOptions{999, 1, 1, 1.0}), DomainError);
}

TEST(PlanTest, Dispatch) {
  EXPECT_EQ(plan_test(random_design(200, 100, 19)).kind, TestKind::Ols);
  EXPECT_EQ(plan_test(random_design(100, 100, 20)).kind, TestKind::Ridge);
  EXPECT_EQ(plan_test(random_design(50, 100, 21)).kind, TestKind::Ridge);
  Matrix X = random_design(200, 10, 22);
  X.col(9) = X.col(0) + 1e-4 * X.col(9);
  EXPECT_EQ(plan_test(X).kind, TestKind::Ridge);
}

TEST(PlanTest, RidgeTraceBound) {
  for (std::uint64_t s : {23u, 24u, 25u}) {
    RegressionData d = standardize(make_data(Vector::LinSpaced(60, -1, 2), random_design(60, 90, s)));
    const auto plan = plan_test(d.X);
    ASSERT_EQ(plan.kind, TestKind::Ridge);
    EXPECT_LE(plan.boundSurrogate, 1.0 / 60.0 + 1e-12);
  }
}

TEST(PlanTest, RidgeWithZeroShiftMatchesOls) {
  const Matrix X = orthonormal_columns(40, 6, 26) * std::sqrt(40.0);
  Rng rng(27);
  std::normal_distribution<double> z;
  Vector y(40);
  for (auto& v : y) v = z(rng);
  const auto data = make_data(y, X);
  TestPlan plan = plan_test(X);
  ASSERT_EQ(plan.kind, TestKind::Ols);
  const double olsStat = test_statistic(data, plan);
  plan.kind = TestKind::Ridge;
  plan.decomp = DesignDecomposition::from_gram(plan.gram, 0.0);
  EXPECT_NEAR(test_statistic(data, plan), olsStat, 1e-10 * olsStat);
}

TEST(LaplaceTest, OutcomeFieldsAndDecisionRule) {
  Scenario s{200, 50, EpPrior(1.0, 1.0), 1, 31, 1.0};
  const auto sim = simulate_replicate(s, 0, 0, nullptr);
  const auto data = standardize(sim.data);
  const auto out = laplace_test(data, 0.05, NullOptions{20'000, 1, 1, 1.0});
  EXPECT_EQ(out.kind, TestKind::Ols);
  EXPECT_EQ(out.n, 200);
  EXPECT_EQ(out.p, 50);
  EXPECT_EQ(out.mcReps, 20'000);
  EXPECT_LT(out.lowerQuantile, out.upperQuantile);
  EXPECT_EQ(out.reject, !(out.statistic > out.lowerQuantile && out.statistic < out.upperQuantile));
  EXPECT_GE(out.nullTailProb, 0.0);
  EXPECT_LE(out.nullTailProb, 1.0);
  EXPECT_TRUE(out.warnings.empty());
  EXPECT_FALSE(laplace_test(sim.data, 0.05, NullOptions{2'000, 1, 1, 1.0}).warnings.empty());
  EXPECT_THROW(laplace_test(make_data(Vector::Zero(200), data.X), 0.05, NullOptions{2'000, 1, 1, 1.0}),
               DegenerateInputError);
}

TEST(LaplaceTest, OracleDecision) {
  const NullDistribution null({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0});
  const auto onEdge = oracle_test(Vector{{0, 0, 1, -1}}, null, 0.2);
  EXPECT_EQ(onEdge.kind, TestKind::Oracle);
  EXPECT_NEAR(onEdge.lowerQuantile, 2.0, 1e-12);
  EXPECT_NEAR(onEdge.upperQuantile, 10.0, 1e-12);
  EXPECT_TRUE(onEdge.reject);  // psi = 2.0 lies on the lower quantile
  EXPECT_FALSE(oracle_test(Vector{{0, 1, 0, -2}}, null, 0.2).reject);
}

TEST(LaplaceTest, LevelSmallStudy) {
  // Level within a binomial band for p in {25, 100}, n in {50, 200}.
  for (auto [n, p] : {std::pair<long, long>{200, 25}, {50, 25}, {200, 100}, {50, 100}}) {
    Scenario s{n, p, EpPrior(1.0, 1.0), 200, 41, 1.0};
    const auto r = run_power_study({s}, PowerOptions{0.05, 20'000, 1});
    EXPECT_LE(r[0].rejectionRate, 0.05 + 3.1 * std::sqrt(0.05 * 0.95 / 200)) << n << "x" << p;
  }
}

TEST(LaplaceTest, PowerMonotoneTowardsEndpoints) {
  auto rate = [](double q) {
    Scenario s{200, 100, EpPrior(1.0, q), 100, 43, 1.0};
    return run_power_study({s}, PowerOptions{0.05, 20'000, 1})[0].rejectionRate;
  };
  const double r1 = rate(1.0);
  EXPECT_GE(rate(0.25), r1);
  EXPECT_GE(rate(4.0), r1);
}

TEST(ErrorBound, HandValues) {
  const Matrix I = Matrix::Identity(10, 10);
  const auto d = DesignDecomposition::from_gram(I, 0.0);
  EXPECT_DOUBLE_EQ(proposition_bound(d, Vector::Ones(10), 0.0, TestKind::Ols), 0.0);
  EXPECT_NEAR(proposition_bound(d, Vector::Ones(10), 1.0, TestKind::Ols), 16.0, 1e-12);
  EXPECT_NEAR(proposition_bound(d, Vector::Ones(10), 1.0, TestKind::Ridge), 16.0, 1e-12);
  EXPECT_THROW(proposition_bound(d, Vector::Zero(10), 1.0, TestKind::Ols), DegenerateInputError);
}

TEST(ErrorBound, DominatesObservedError) {
  const Matrix X = random_design(400, 40, 51);
  const auto d = DesignDecomposition::from_design(X, 0.0);
  Rng rng(52);
  const auto b = ep_sample(40, EpPrior(1.0, 1.0), rng);
  const Vector beta = Eigen::Map<const Vector>(b.data(), 40);
  const double bound = proposition_bound(d, beta, 1.0, TestKind::Ols);
  std::normal_distribution<double> z;
  double acc = 0.0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    Vector y = X * beta;
    for (auto& v : y) v += z(rng);
    const double e = psi(ols_estimate(make_data(y, X))) - psi(beta);
    acc += e * e;
  }
  EXPECT_LE(acc / reps, bound);
}
