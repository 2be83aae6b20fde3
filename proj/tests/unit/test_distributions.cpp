#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eptest/distributions.hpp"
#include "oracles.hpp"

using namespace eptest;

TEST(EpPrior, RejectsInvalidParameters) {
  EXPECT_THROW(EpPrior(0.0, 1.0), DomainError);
  EXPECT_THROW(EpPrior(1.0, 0.0), DomainError);
  EXPECT_THROW(EpPrior(1.0, -2.0), DomainError);
  EXPECT_THROW(EpPrior(std::nan(""), 1.0), DomainError);
}

TEST(EpPrior, LambdaMatchesClosedForm) {
  for (double q : {0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 4.0}) {
    for (double tau2 : {0.01, 1.0, 7.5}) {
      const EpPrior prior(tau2, q);
      const double expected = std::pow(tau2, -q / 2) * std::pow(std::tgamma(3 / q) / std::tgamma(1 / q), q / 2);
      EXPECT_NEAR(prior.lambda() / expected, 1.0, 1e-12) << "q=" << q << " tau2=" << tau2;
    }
  }
  // Laplace rate sqrt(2) at unit variance, normal 1/(2 tau2).
  EXPECT_NEAR(EpPrior(1.0, 1.0).lambda(), std::numbers::sqrt2, 1e-14);
  EXPECT_NEAR(EpPrior(4.0, 2.0).lambda(), 1.0 / 8.0, 1e-15);
}

TEST(EpDensity, SpecialCases) {
  EXPECT_NEAR(ep_density(0.0, EpPrior(1.0, 2.0)), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(ep_density(0.0, EpPrior(1.0, 1.0)), std::numbers::sqrt2 / 2, 1e-14);
  EXPECT_NEAR(ep_density(1.0, EpPrior(1.0, 1.0)), std::numbers::sqrt2 / 2 * std::exp(-std::numbers::sqrt2), 1e-14);
  EXPECT_NEAR(ep_density(1.0, EpPrior(1.0, 1.0)), 0.1719, 5e-5);
  EXPECT_THROW(ep_density(std::numeric_limits<double>::infinity(), EpPrior(1.0, 1.0)), DomainError);
}

TEST(EpDensity, MatchesLaplaceAndNormalPointwise) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 200; ++i) {
    const double b = u(rng);
    const double tau2 = 0.1 + std::abs(u(rng));
    const double laplaceScale = std::sqrt(tau2 / 2);
    EXPECT_NEAR(ep_density(b, EpPrior(tau2, 1.0)), std::exp(-std::abs(b) / laplaceScale) / (2 * laplaceScale),
                1e-12);
    EXPECT_NEAR(ep_density(b, EpPrior(tau2, 2.0)),
                std::exp(-b * b / (2 * tau2)) / std::sqrt(2 * std::numbers::pi * tau2), 1e-12);
  }
}

TEST(EpDensity, AgreesWithIndependentFormulaAndIntegratesToOne) {
  for (double q : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const EpPrior prior(1.3, q);
    for (double b : {-3.0, -0.4, 0.0, 0.1, 2.5}) {
      EXPECT_NEAR(ep_density(b, prior), oracle::ep_density(b, 1.3, q), 1e-12 * (1 + oracle::ep_density(b, 1.3, q)));
    }
    const double mass = oracle::integrate_even([&](double b) { return ep_density(b, prior); });
    EXPECT_NEAR(mass, 1.0, 1e-8) << "q=" << q;
    const double var = oracle::integrate_even([&](double b) { return b * b * ep_density(b, prior); });
    EXPECT_NEAR(var, 1.3, 1e-7) << "q=" << q;
    EXPECT_DOUBLE_EQ(ep_density(0.7, prior), ep_density(-0.7, prior));
  }
}

TEST(EpKurtosis, KnownValues) {
  EXPECT_NEAR(ep_kurtosis(1.0), 6.0, 1e-12);
  EXPECT_NEAR(ep_kurtosis(2.0), 3.0, 1e-12);
  EXPECT_NEAR(ep_kurtosis(0.5), 362880.0 / 14400.0, 1e-10);
  EXPECT_NEAR(ep_kurtosis(0.5), 25.2, 1e-10);
  EXPECT_THROW(ep_kurtosis(0.0), DomainError);
  EXPECT_THROW(ep_kurtosis(-1.0), DomainError);
  // Small q overflows tgamma but not the log-gamma route.
  EXPECT_TRUE(std::isfinite(ep_log_kurtosis(0.01)));
  EXPECT_GT(ep_kurtosis(1000.0), 1.8);
  EXPECT_LT(ep_kurtosis(1000.0), 1.81);
}

TEST(EpKurtosis, StrictlyDecreasing) {
  double prev = std::numeric_limits<double>::infinity();
  for (double q = 0.05; q < 20; q *= 1.1) {
    const double k = ep_kurtosis(q);
    EXPECT_LT(k, prev) << q;
    prev = k;
  }
}

TEST(SolveQ, InvertsKurtosis) {
  EXPECT_NEAR(solve_q_from_kurtosis(6.0), 1.0, 1e-10);
  EXPECT_NEAR(solve_q_from_kurtosis(3.0), 2.0, 1e-10);
  EXPECT_NEAR(solve_q_from_kurtosis(25.2), 0.5, 1e-8);
  for (double q = 0.1; q <= 4.0; q += 0.05) {
    const double k = ep_kurtosis(q);
    EXPECT_NEAR(ep_kurtosis(solve_q_from_kurtosis(k)), k, 1e-10 * k);
    EXPECT_NEAR(solve_q_from_kurtosis(k), q, 1e-8 * q);
  }
  for (double k = 3.1; k <= 30; k += 0.3) EXPECT_NEAR(ep_kurtosis(solve_q_from_kurtosis(k)), k, 1e-8);
  for (double k : {1.9, 2.0, 2.5, 2.9}) EXPECT_NEAR(ep_kurtosis(solve_q_from_kurtosis(k)), k, 1e-10 * k);
  EXPECT_GT(solve_q_from_kurtosis(2.0), 2.0);
  EXPECT_THROW(solve_q_from_kurtosis(1.85), OutOfRangeError);
  EXPECT_THROW(solve_q_from_kurtosis(1.0), OutOfRangeError);
  EXPECT_THROW(solve_q_from_kurtosis(std::nan("")), OutOfRangeError);
  EXPECT_THROW(solve_q_from_kurtosis(std::numeric_limits<double>::infinity()), OutOfRangeError);
}

TEST(EpSample, NormalCaseKurtosis) {
  Rng rng = substream(1, {1});
  const auto x = ep_sample(1'000'000, EpPrior(1.0, 2.0), rng);
  EXPECT_NEAR(oracle::sample_kurtosis(x), 3.0, 0.02);
}

TEST(EpSample, LaplaceVarianceAndKurtosis) {
  Rng rng = substream(1, {2});
  const auto x = ep_sample(1'000'000, EpPrior(4.0, 1.0), rng);
  EXPECT_NEAR(oracle::sample_moment(x, 2), 4.0, 0.05);
  EXPECT_NEAR(oracle::sample_kurtosis(x), 6.0, 0.1);
}

TEST(EpSample, VarianceWithinFourStandardErrors) {
  for (double q : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    for (double tau2 : {0.5, 2.0}) {
      Rng rng = substream(9, {static_cast<std::uint64_t>(q * 100), static_cast<std::uint64_t>(tau2 * 10)});
      const std::size_t n = 400'000;
      const auto x = ep_sample(n, EpPrior(tau2, q), rng);
      const double m2 = oracle::sample_moment(x, 2);
      // Var(b^2) = E b^4 - tau2^2 = tau2^2 (K - 1).
      const double se = tau2 * std::sqrt((ep_kurtosis(q) - 1.0) / static_cast<double>(n));
      EXPECT_NEAR(m2, tau2, 4 * se) << "q=" << q << " tau2=" << tau2;
    }
  }
}

TEST(EpSample, Deterministic) {
  Rng a = substream(5, {1}), b = substream(5, {1});
  EXPECT_EQ(ep_sample(1000, EpPrior(1.0, 0.3), a), ep_sample(1000, EpPrior(1.0, 0.3), b));
  EXPECT_THROW(ep_sample(0, EpPrior(1.0, 1.0), a), DomainError);
}

TEST(SpikeSlab, KurtosisAndVariance) {
  EXPECT_DOUBLE_EQ((SpikeSlab{0.5, 1.0}).kurtosis(), ep_kurtosis(1.0));
  struct Case {
    double pi, kurt, tol;
  };
  for (const Case c : {Case{1.0, 3.0, 0.03}, Case{0.5, 6.0, 0.15}, Case{0.1, 30.0, 1.5}}) {
    Rng rng = substream(11, {static_cast<std::uint64_t>(c.pi * 100)});
    const auto x = spike_slab_sample(1'000'000, SpikeSlab{c.pi, 1.0}, rng);
    EXPECT_NEAR(oracle::sample_moment(x, 4) / std::pow(oracle::sample_moment(x, 2), 2), c.kurt, c.tol);
    EXPECT_NEAR(oracle::sample_moment(x, 2), 1.0, 0.02);
    const double zeros = static_cast<double>(std::count(x.begin(), x.end(), 0.0)) / static_cast<double>(x.size());
    EXPECT_NEAR(zeros, 1.0 - c.pi, 0.003);
  }
}

TEST(SpikeSlab, RejectsInvalid) {
  Rng rng(1);
  EXPECT_THROW(spike_slab_sample(10, SpikeSlab{0.0, 1.0}, rng), DomainError);
  EXPECT_THROW(spike_slab_sample(10, SpikeSlab{1.5, 1.0}, rng), DomainError);
  EXPECT_THROW(spike_slab_sample(10, SpikeSlab{0.5, -1.0}, rng), DomainError);
}
