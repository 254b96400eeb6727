#include <cmath>

#include "doctest.h"
#include "qflrl/statest.hpp"
#include "test_helpers.hpp"

using namespace qflrl;
using namespace qflrl::statest;

TEST_CASE("sample_state_uniform: unit norm, zero mean, hat-box z marginal") {
  RngStream rng(91);
  const std::size_t n = 1000000;
  double sx = 0.0, sy = 0.0, sz = 0.0;
  std::vector<std::size_t> z_bins(20, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const BlochVector y = sample_state_uniform(rng);
    CHECK(std::fabs(norm(y) - 1.0) < 1e-12);
    sx += y[0];
    sy += y[1];
    sz += y[2];
    const std::size_t bin = std::min<std::size_t>(
        19, static_cast<std::size_t>((y[2] + 1.0) * 10.0));
    z_bins[bin]++;
  }
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(sx / n) < bound);
  CHECK(std::fabs(sy / n) < bound);
  CHECK(std::fabs(sz / n) < bound);

  // the z component of a uniform spherical state is uniform on [-1, 1]
  const std::vector<double> uniform(20, 0.05);
  CHECK(qflrl::testing::chi_square_statistic(z_bins, uniform, n) <
        qflrl::testing::chi_square_99(19));
}

TEST_CASE("simulate_outcomes: aligned, orthogonal and empirical frequencies") {
  RngStream rng(92);
  MeasurementPlan z_plan({{{0, 0, 1}}, {{0, 0, 1}}, {{0, 0, 1}}});
  const BlochVector up{0.0, 0.0, 1.0};
  for (int rep = 0; rep < 50; ++rep)
    for (int o : simulate_outcomes(up, z_plan, rng)) CHECK(o == 1);

  // orthogonal direction: p = 1/2
  const BlochVector x_state{1.0, 0.0, 0.0};
  std::size_t ones = 0;
  const std::size_t n = 100000;
  for (std::size_t k = 0; k < n; ++k) ones += simulate_outcomes(x_state, z_plan, rng)[0];
  CHECK(std::fabs(static_cast<double>(ones) / n - 0.5) < 4.0 * 0.5 / std::sqrt(n));

  // general state: binomial confidence interval per direction
  MeasurementPlan plan = MeasurementPlan::default_plan();
  const BlochVector s{0.3, -0.5, 0.6};
  std::vector<std::size_t> counts(plan.size(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    const OutcomeString x = simulate_outcomes(s, plan, rng);
    for (std::size_t j = 0; j < plan.size(); ++j) counts[j] += x[j];
  }
  for (std::size_t j = 0; j < plan.size(); ++j) {
    const BlochVector& d = plan.directions[j];
    const double p = 0.5 * (1.0 + d[0] * s[0] + d[1] * s[1] + d[2] * s[2]);
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::fabs(static_cast<double>(counts[j]) / n - p) < 5.0 * se);
  }
}

TEST_CASE("bayes_oracle: empty plan, strong data, norm bound") {
  RngStream rng(93);
  MeasurementPlan empty{std::vector<BlochVector>{}};
  const BayesOracleResult nothing = bayes_oracle({}, empty, 10000, rng);
  CHECK(norm(nothing.estimate) == 0.0);

  // 20 measurements along z all returning 1 pull the posterior toward +z
  std::vector<BlochVector> dirs(20, BlochVector{0.0, 0.0, 1.0});
  MeasurementPlan plan(std::move(dirs));
  const BayesOracleResult strong = bayes_oracle(OutcomeString(20, 1), plan, 40000, rng);
  CHECK(strong.estimate[2] > 0.9);
  CHECK(norm(strong.estimate) <= 1.0 + 1e-12);  // convex combination of unit vectors

  CHECK_THROWS_AS(bayes_oracle(OutcomeString(20, 1), plan, 100, rng), InvalidInput);
}

TEST_CASE("bayes_oracle is exactly invariant under same-direction permutations") {
  MeasurementPlan plan = MeasurementPlan::default_plan();
  OutcomeString x{1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1};
  // swap outcomes within the x-axis block (0..3) and the z block (8..11)
  OutcomeString permuted = x;
  std::swap(permuted[0], permuted[3]);
  std::swap(permuted[8], permuted[9]);
  RngStream rng_a(94, 5), rng_b(94, 5);
  const BayesOracleResult a = bayes_oracle(x, plan, 10000, rng_a);
  const BayesOracleResult b = bayes_oracle(permuted, plan, 10000, rng_b);
  for (std::size_t c = 0; c < 3; ++c) CHECK(a.estimate[c] == b.estimate[c]);
}

TEST_CASE("reconstructor training beats the trivial baseline and tracks the oracle (smoke)") {
  MeasurementPlan plan = MeasurementPlan::default_plan();
  ReconstructorConfig config;
  config.steps = 1200;
  config.batch_size = 128;
  config.test_size = 400;
  config.oracle_mc = 10000;
  config.log_every = 300;
  config.seed = 95;
  const ReconstructorResult r = train_reconstructor(plan, config);

  CHECK(r.test_mse < r.baseline_mse);  // predicting 0 has MSE E|y|^2 = 1
  CHECK(r.test_mse >= r.oracle_mse - 3.0 * r.oracle_mse_stderr);
  // fresh data regime: train and test errors agree
  CHECK(std::fabs(r.train_mse - r.test_mse) / r.test_mse < 0.10);
}
