// Simulates a sparse-ish regression, tests the Laplace prior and fits the
// adaptive estimator with short chains.

#include <iostream>

#include "eptest/eptest.hpp"

int main() {
  using namespace eptest;

  Scenario s;
  s.n = 200;
  s.p = 100;
  s.truth = EpPrior(1.0, 0.25);
  s.seed = 7;
  SimulatedData sim = simulate_replicate(s, 0, 0, nullptr);
  const RegressionData data = standardize(sim.data);

  AdaptiveConfig cfg;
  cfg.mcReps = 20'000;
  cfg.chain = GibbsConfig::simulation();
  cfg.mode.restarts = 10;
  cfg.seed = 11;
  const AdaptiveResult r = adaptive_estimate(data, cfg);

  std::cout << "test kind " << to_string(r.test.kind) << ", psi = " << r.test.statistic << ", null band ["
            << r.test.lowerQuantile << ", " << r.test.upperQuantile << "], reject = " << std::boolalpha
            << r.test.reject << '\n';
  std::cout << "sigma2 = " << r.variances.sigma2Hat << ", tau2 = " << r.variances.tau2Hat << ", q_hat = " << r.shape.q
            << ", q used = " << r.qUsed << '\n';
  if (r.fit) {
    std::cout << "mode sparsity " << r.mode()->sparsityRate << ", min ESS " << r.draws()->min_ess() << '\n';
  }
}
