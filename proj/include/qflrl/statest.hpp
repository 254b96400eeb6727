#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qflrl/nn.hpp"
#include "qflrl/rng.hpp"

namespace qflrl::statest {

using BlochVector = std::array<double, 3>;

double norm(const BlochVector& y);

/// Fixed measurement directions on the Bloch sphere; outcome j is 1 with
/// probability (1 + n_j . y)/2.
struct MeasurementPlan {
  std::vector<BlochVector> directions;

  explicit MeasurementPlan(std::vector<BlochVector> dirs);
  std::size_t size() const { return directions.size(); }

  /// 4 measurements along each of x, y, z (M = 12).
  static MeasurementPlan default_plan();
};

using OutcomeString = std::vector<int>;

/// Uniform on the unit sphere via a normalized 3-D Gaussian.
BlochVector sample_state_uniform(RngStream& rng);

OutcomeString simulate_outcomes(const BlochVector& state, const MeasurementPlan& plan,
                                RngStream& rng);

struct BayesOracleResult {
  BlochVector estimate{0.0, 0.0, 0.0};
  double effective_sample_size = 0.0;
  std::size_t ess_warnings = 0;  // times n_mc had to be doubled
};

/// Monte Carlo posterior mean under the uniform prior: n_mc uniform states
/// importance-weighted by the outcome likelihood. Identical-direction
/// measurements enter through their outcome counts, so permuting them leaves
/// the estimate bit-identical.
BayesOracleResult bayes_oracle(const OutcomeString& outcomes, const MeasurementPlan& plan,
                               std::size_t n_mc, RngStream& rng);

struct ReconstructorConfig {
  std::vector<std::size_t> hidden_layers{64, 64};
  std::size_t steps = 4000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t test_size = 2000;
  std::size_t oracle_mc = 20000;
  std::size_t log_every = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

struct ReconstructorPoint {
  std::size_t step = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
};

struct ReconstructorResult {
  nn::Network net;
  std::vector<ReconstructorPoint> curve;
  double train_mse = 0.0;   // tail average over the last quarter of training
  double test_mse = 0.0;    // fresh test set, mean |y_hat - y|^2
  double oracle_mse = 0.0;  // Bayes posterior mean on the same test set
  double oracle_mse_stderr = 0.0;
  double baseline_mse = 1.0;  // predicting the zero vector on unit states
};

/// Trains a network on fresh (outcome string, Bloch vector) pairs with the
/// quadratic loss and compares against the Bayes posterior-mean oracle on a
/// shared test set. Outcomes are fed to the network as raw 0/1 inputs;
/// outputs are deliberately unclamped.
ReconstructorResult train_reconstructor(const MeasurementPlan& plan,
                                        const ReconstructorConfig& config);

}  // namespace qflrl::statest
