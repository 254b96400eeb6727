#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qflrl/nn.hpp"
#include "qflrl/qsim.hpp"
#include "qflrl/rl.hpp"

namespace qflrl::qcontrol {

/// Closed-loop cavity stabilization: a softmax policy network reads a window
/// of recent measurement signal and picks one of the discretized drive
/// amplitudes; episodes are scored by the per-step overlap with the target
/// Fock state.
struct ControlConfig {
  std::vector<cdouble> amplitude_grid;   // drive amplitudes, one per action
  std::size_t episode_steps = 50;        // T
  std::size_t window = 10;               // T_msmt input neurons
  std::size_t target_fock = 1;
  std::size_t batch_size = 64;
  qsim::SMEConfig sme;
  std::vector<std::size_t> hidden_layers{64, 32};
  bool use_adam = true;
  double eta = 1e-3;
  rl::Baseline baseline = rl::Baseline::BatchMean;
  std::size_t updates = 300;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0: resolve from QFLRL_THREADS / hardware

  // observation standardization (fixed affine map, set by finalize())
  double obs_shift = 0.0;
  double obs_scale = 1.0;

  /// Fills the default grid/standardization and checks invariants.
  void finalize();
  static ControlConfig defaults();
};

struct EpisodeBatch {
  std::size_t n_traj = 0, steps = 0, window = 0;
  Tensor observations;           // [n_traj * steps, window]
  std::vector<int> actions;      // n_traj * steps
  std::vector<double> rewards;   // n_traj * steps
  std::vector<double> returns;   // per trajectory
  std::size_t leakage_warnings = 0;

  double mean_return() const;
  double return_std() const;
  double mean_final_reward() const;
};

struct TrainLogRow {
  std::size_t update = 0;
  double mean_return = 0.0;
  double return_std = 0.0;
  double mean_final_p_target = 0.0;
  std::vector<std::size_t> action_histogram;
};

/// Last `window` per-step signal averages, zero-padded on the left before
/// enough history exists, then standardized by the fixed affine map.
Tensor build_observation(const std::vector<double>& signal_steps, std::size_t window,
                         double shift, double scale);

nn::Network make_policy_network(const ControlConfig& config, RngStream& rng);

/// Simulates batch_size independent feedback trajectories from vacuum with
/// per-trajectory random streams (seed, stream_offset + k).
EpisodeBatch run_episode_batch(const nn::Network& policy, const ControlConfig& config,
                               std::uint64_t stream_offset);

/// One policy-gradient ascent step from an episode batch, using the
/// log-softmax surrogate through the network's backward pass.
TrainLogRow reinforce_step(nn::Network& policy, nn::Optimizer& opt, const EpisodeBatch& batch,
                           const ControlConfig& config);

struct TrainResult {
  std::vector<TrainLogRow> log;
  nn::Network final_policy;
  nn::Network best_policy;   // highest batch mean return seen
  double best_mean_return = 0.0;
  std::size_t leakage_warnings = 0;
};

TrainResult train(const ControlConfig& config);

/// Time-averaged P(target) of every constant drive on the grid, computed
/// with the deterministic ensemble evolution; returns the best value and
/// fills per_amplitude when given.
double best_constant_drive(const ControlConfig& config, std::vector<double>* per_amplitude = nullptr);

/// Evaluates a trained policy on fresh trajectories: mean time-averaged
/// P(target) across the evaluation batch.
double evaluate_policy(const nn::Network& policy, const ControlConfig& config,
                       std::size_t n_traj, std::uint64_t stream_offset);

/// Spread of the policy's action probabilities across random observations:
/// sum over actions of the across-observation variance. Shrinks toward 0 as
/// the policy becomes observation-independent.
double observation_sensitivity(const nn::Network& policy, std::size_t window, std::size_t n_probe,
                               std::uint64_t seed);

}  // namespace qflrl::qcontrol
