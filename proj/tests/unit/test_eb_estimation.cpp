#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "eptest/eb_estimation.hpp"
#include "eptest/simulation.hpp"
#include "oracles.hpp"

using namespace eptest;

namespace {

RegressionData sim_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed, double q = 1.0) {
  Scenario s{n, p, EpPrior(1.0, q), 1, seed, 1.0};
  return simulate_replicate(s, 0, 0, nullptr).data;
}

}  // namespace

TEST(VarianceObjective, ScalarReduction) {
  MarginalSpectrum s;
  s.n = 1;
  s.lambda = Vector{{1.0}};
  s.w2 = Vector{{2.25}};
  for (auto [t, g] : {std::pair{0.5, 0.5}, {1.0, 0.0}, {0.0, 3.0}, {2.0, 1.0}}) {
    EXPECT_NEAR(variance_objective(t, g, s), std::log(t + g) + 2.25 / (t + g), 1e-14);
  }
  const auto est = estimate_variances(s);
  EXPECT_NEAR(est.tau2Hat + est.sigma2Hat, 2.25, 1e-9);
}

TEST(VarianceObjective, EigenFormMatchesDense) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Matrix X = simulate_design(5, 3, rng);
    std::normal_distribution<double> z;
    Vector y(5);
    for (auto& v : y) v = z(rng);
    const auto data = make_data(y, X);
    for (auto [t, g] : {std::pair{0.3, 0.7}, {2.0, 0.1}, {0.0, 1.0}, {1e-3, 5.0}}) {
      const double dense = oracle::variance_objective_dense(t, g, X, y);
      EXPECT_NEAR(variance_objective(t, g, data), dense, 1e-10 * (1 + std::abs(dense)));
    }
    // Wide design: both spectra paths.
    const Matrix W = simulate_design(4, 9, rng);
    const auto wide = make_data(y.head(4), W);
    EXPECT_NEAR(variance_objective(0.4, 0.0, wide), oracle::variance_objective_dense(0.4, 0.0, W, y.head(4)),
                1e-9);
    EXPECT_NEAR(variance_objective(0.4, 1.2, wide), oracle::variance_objective_dense(0.4, 1.2, W, y.head(4)),
                1e-10);
  }
}

TEST(VarianceObjective, RejectsIndefinite) {
  const auto data = sim_data(30, 5, 3);
  EXPECT_THROW(variance_objective(1.0, 0.0, data), DomainError);
  EXPECT_THROW(variance_objective(0.0, 0.0, data), DomainError);
  EXPECT_THROW(variance_objective(-1.0, 1.0, data), DomainError);
}

TEST(EstimateVariances, BeatsGridOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(seed % 4) * 5;
    const Eigen::Index p = 4 + static_cast<Eigen::Index>(seed % 5) * 4;
    const auto data = sim_data(n, p, 100 + seed);
    const auto est = estimate_variances(data);
    const auto grid = oracle::variance_grid_min(data.X, data.y);
    EXPECT_LE(est.objectiveValue, grid.value + 1e-6) << "seed " << seed;
    if (!est.atBoundary) {
      EXPECT_NEAR(est.objectiveValue, oracle::variance_objective_dense(est.tau2Hat, est.sigma2Hat, data.X, data.y),
                  1e-8 * (1 + std::abs(est.objectiveValue)));
    }
    EXPECT_FALSE(est.sigma2Hat == 0.0 && est.tau2Hat == 0.0);
  }
}

TEST(EstimateVariances, ScalingAndPermutation) {
  const auto data = sim_data(80, 30, 7);
  const auto base = estimate_variances(data);
  RegressionData scaled = data;
  scaled.y *= 3.0;
  const auto s = estimate_variances(scaled);
  EXPECT_NEAR(s.sigma2Hat / base.sigma2Hat, 9.0, 1e-6);
  EXPECT_NEAR(s.tau2Hat / base.tau2Hat, 9.0, 1e-6);
  RegressionData perm = data;
  for (Eigen::Index j = 0; j < 30; ++j) perm.X.col(j) = data.X.col(29 - j);
  const auto pe = estimate_variances(perm);
  EXPECT_NEAR(pe.sigma2Hat, base.sigma2Hat, 1e-8 * base.sigma2Hat);
  EXPECT_NEAR(pe.tau2Hat, base.tau2Hat, 1e-8 * base.tau2Hat);
  const auto qa = estimate_q(data, TestKind::Ols);
  const auto qb = estimate_q(scaled, TestKind::Ols);
  EXPECT_NEAR(qa.q, qb.q, 1e-10);
}

TEST(EstimateVariances, ConsistentAtModerateSize) {
  double s2 = 0.0, t2 = 0.0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    const auto est = estimate_variances(sim_data(200, 100, 500 + static_cast<std::uint64_t>(r)));
    s2 += est.sigma2Hat;
    t2 += est.tau2Hat;
  }
  EXPECT_NEAR(s2 / reps, 1.0, 0.15);
  EXPECT_NEAR(t2 / reps, 1.0, 0.15);
}

TEST(EstimateVariances, BoundaryOccursWhenPExceedsN) {
  int boundary = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto est = estimate_variances(sim_data(50, 100, 900 + seed));
    if (est.atBoundary) {
      ++boundary;
      EXPECT_TRUE(est.sigma2Hat == 0.0 || est.tau2Hat == 0.0);
    }
  }
  EXPECT_GT(boundary, 0);
}

TEST(EstimateVariances, Degenerate) {
  const auto data = sim_data(20, 5, 8);
  EXPECT_THROW(estimate_variances(make_data(Vector::Zero(20), data.X)), DegenerateInputError);
}

TEST(EstimateQ, InverseMapOnExactKurtosis) {
  // Noiseless orthogonal design, so b_ols = b exactly.
  Vector six = Vector::Zero(12);
  six(0) = 1.0;
  six(1) = -1.0;
  ASSERT_NEAR(psi(six), 6.0, 1e-14);
  auto est = estimate_q(make_data(six, Matrix::Identity(12, 12)), TestKind::Ols);
  EXPECT_NEAR(est.q, 1.0, 1e-9);
  EXPECT_FALSE(est.clamped);

  Vector three = six.head(6);
  ASSERT_NEAR(psi(three), 3.0, 1e-14);
  est = estimate_q(make_data(2.0 * three, 2.0 * Matrix::Identity(6, 6)), TestKind::Ols);
  EXPECT_NEAR(est.q, 2.0, 1e-9);
}

TEST(EstimateQ, ClampsLowKurtosis) {
  const Vector b{{1.0, -1.0, 1.0, -1.0}};
  const auto est = estimate_q(make_data(b, Matrix::Identity(4, 4)), TestKind::Ols);
  EXPECT_TRUE(est.clamped);
  EXPECT_DOUBLE_EQ(est.kurtosis, kKurtosisFloor);
  EXPECT_DOUBLE_EQ(est.rawKurtosis, 1.0);
  EXPECT_NEAR(ep_kurtosis(est.q), kKurtosisFloor, 1e-10);
}

TEST(EstimateQ, RidgePathAppliesCorrection) {
  const auto data = standardize(sim_data(60, 80, 12));
  const auto plan = plan_test(data.X);
  ASSERT_EQ(plan.kind, TestKind::Ridge);
  const auto est = estimate_q(data, plan);
  const auto k = bias_constants(plan.gram, plan.decomp);
  EXPECT_DOUBLE_EQ(est.statistic, test_statistic(data, plan));
  EXPECT_DOUBLE_EQ(est.rawKurtosis, corrected_kurtosis(est.statistic, k));
  EXPECT_THROW(estimate_q(data, TestKind::Oracle), DomainError);
}

TEST(EstimateQ, SmallShapeCentredBelowOneAndLargeShapeMoreVariable) {
  auto qs = [](double q) {
    std::vector<double> out;
    for (std::uint64_t r = 0; r < 40; ++r) out.push_back(estimate_q(sim_data(200, 100, 700 + r, q), TestKind::Ols).q);
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto small = qs(0.25);
  const auto large = qs(4.0);
  EXPECT_LT(small[20], 1.0);
  const double iqrSmall = small[30] - small[10];
  const double iqrLarge = large[30] - large[10];
  EXPECT_GT(iqrLarge, iqrSmall);
}
