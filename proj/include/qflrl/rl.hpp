#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qflrl/rng.hpp"
#include "qflrl/tensor.hpp"

namespace qflrl::rl {

/// Deterministic finite MDP given as explicit transitions, for the value
/// iteration oracle. transitions[s][a] = (next state, reward, terminal).
struct FiniteMDP {
  struct Transition {
    std::size_t next = 0;
    double reward = 0.0;
    bool done = false;
  };
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<std::vector<Transition>> transitions;
};

struct StepResult {
  std::int64_t next_state = 0;
  double reward = 0.0;
  bool done = false;
};

/// Markov environment: step depends only on (state, action, rng). States are
/// opaque handles; policies see only observation(state).
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::int64_t reset(RngStream& rng) = 0;
  virtual StepResult step(std::int64_t state, int action, RngStream& rng) = 0;
  virtual int observation(std::int64_t state) const = 0;
  virtual int action_count() const = 0;
  virtual int observation_count() const = 0;
  /// Explicit enumeration for oracle use; empty when the MDP is not
  /// enumerable (stochastic or unbounded).
  virtual std::optional<FiniteMDP> enumerate() const { return std::nullopt; }
};

struct Trajectory {
  std::vector<int> observations;
  std::vector<int> actions;
  std::vector<double> rewards;
  double total_return = 0.0;
};

/// Policy over two actions per observed state: the "base" action of state s
/// has probability sigmoid(theta[s]), the other action the complement.
struct SigmoidPolicy {
  std::vector<double> theta;
  std::vector<int> base_action;

  SigmoidPolicy(std::size_t n_states, int base = 0)
      : theta(n_states, 0.0), base_action(n_states, base) {}

  double prob(int obs, int action) const;
  int sample(int obs, RngStream& rng) const;
  /// d/dtheta[obs] of ln pi(action|obs)
  double log_grad(int obs, int action) const;
};

using PolicyFn = std::function<int(int observation, RngStream& rng)>;

/// Alternates policy sampling and env.step for up to `steps` steps or until
/// the environment reports done.
Trajectory sample_trajectory(Environment& env, const PolicyFn& policy, std::size_t steps,
                             RngStream& rng);

enum class Baseline { None, BatchMean };

struct PolicyGradientDiagnostics {
  double mean_return = 0.0;
  double grad_norm = 0.0;
};

/// Batch-mean reinforcement update: theta += eta * mean_tau[ (R - b) *
/// sum_t dln pi(a_t|s_t) ]. With Baseline::BatchMean, b is the batch mean
/// return, which leaves the expected update unchanged.
PolicyGradientDiagnostics policy_gradient_update(const std::vector<Trajectory>& batch,
                                                 SigmoidPolicy& policy, double eta,
                                                 Baseline baseline);

/// d/dtheta of ln pi for the single-parameter walker policy
/// pi(+1) = sigmoid(theta); action is +1 or -1.
double walker_logpolicy_grad(double theta, int action);

/// Closed-form expected update for the walker task: 2 eta T pi (1 - pi).
double walker_analytic_update(double eta, std::size_t steps, double theta);

struct QTable {
  Tensor q;  // [n_states, n_actions]
  double gamma = 0.9;
  double alpha = 0.1;

  QTable(std::size_t n_states, std::size_t n_actions, double gamma, double alpha);
  double max_q(std::size_t s) const;
  int argmax_action(std::size_t s) const;  // lowest-index tie-break
};

/// Q(s,a) += alpha (r + gamma max_a' Q(s',a') - Q(s,a)); terminal
/// transitions bootstrap with 0.
void q_update(QTable& table, std::size_t s, int a, double r, std::size_t s_next, bool done);

/// Sweeps the optimality recursion until the largest change drops below tol.
Tensor value_iteration_oracle(const FiniteMDP& mdp, double gamma, double tol);

/// Convenience wrapper: rejects environments that cannot be enumerated.
Tensor value_iteration_for_env(const Environment& env, double gamma, double tol);

/// States reachable from `start` under any action sequence (terminal
/// transitions are not expanded further).
std::vector<bool> reachable_states(const FiniteMDP& mdp, std::size_t start);

int epsilon_greedy(const QTable& table, std::size_t s, double epsilon, RngStream& rng);

// --- environments ---

/// Biased walker: actions {0: move +1, 1: move -1}, single dummy observation,
/// return x(T) delivered as one terminal reward.
class WalkerEnv : public Environment {
 public:
  explicit WalkerEnv(std::size_t horizon) : horizon_(horizon) {}
  std::int64_t reset(RngStream& rng) override;
  StepResult step(std::int64_t state, int action, RngStream& rng) override;
  int observation(std::int64_t) const override { return 0; }
  int action_count() const override { return 2; }
  int observation_count() const override { return 1; }

  static int position(std::int64_t state);
  static int time(std::int64_t state);

 private:
  std::size_t horizon_;
};

/// Walker with a target site: actions {0: move +1, 1: stay}; observation is
/// 1 on target, 0 otherwise; reward 1 for every step ending on the target.
/// The target position is drawn uniformly from {1..x_max} per episode.
class WalkerTargetEnv : public Environment {
 public:
  WalkerTargetEnv(int x_max, std::size_t horizon) : x_max_(x_max), horizon_(horizon) {}
  std::int64_t reset(RngStream& rng) override;
  StepResult step(std::int64_t state, int action, RngStream& rng) override;
  int observation(std::int64_t state) const override;
  int action_count() const override { return 2; }
  int observation_count() const override { return 2; }

 private:
  int x_max_;
  std::size_t horizon_;
};

/// Grid world with boxes to pick up: actions {0:N, 1:S, 2:W, 3:E}, reward +1
/// per pickup, done when every box is collected. Deterministic, enumerable.
class GridworldBoxEnv : public Environment {
 public:
  GridworldBoxEnv(std::size_t height, std::size_t width, std::size_t start_cell,
                  std::vector<std::size_t> box_cells);
  std::int64_t reset(RngStream& rng) override;
  StepResult step(std::int64_t state, int action, RngStream& rng) override;
  int observation(std::int64_t state) const override;
  int action_count() const override { return 4; }
  int observation_count() const override;
  std::optional<FiniteMDP> enumerate() const override;

  std::size_t start_state_index() const;

 private:
  std::size_t height_, width_;
  std::size_t start_cell_;
  std::vector<std::size_t> box_cells_;
  std::size_t n_masks() const { return std::size_t{1} << box_cells_.size(); }
  StepResult step_index(std::size_t index, int action) const;
};

/// 1-D chain whose reward site pays 1 for occupying it, then terminates.
/// Actions {0: +1, 1: -1}, positions clipped to [0, length).
class ChainEnv : public Environment {
 public:
  ChainEnv(std::size_t length, std::size_t reward_site, std::size_t start)
      : length_(length), reward_site_(reward_site), start_(start) {}
  std::int64_t reset(RngStream&) override { return static_cast<std::int64_t>(start_); }
  StepResult step(std::int64_t state, int action, RngStream&) override;
  int observation(std::int64_t state) const override { return static_cast<int>(state); }
  int action_count() const override { return 2; }
  int observation_count() const override { return static_cast<int>(length_); }
  std::optional<FiniteMDP> enumerate() const override;

 private:
  std::size_t length_, reward_site_, start_;
};

// --- training drivers (shared by the CLI experiments and the tests) ---

struct PgTrainConfig {
  std::size_t batch_size = 1;
  std::size_t updates = 100;
  std::size_t horizon = 100;
  double eta = 0.01;
  Baseline baseline = Baseline::None;
  std::uint64_t seed = 1;
};

struct PgTrainRow {
  std::size_t update = 0;
  double mean_return = 0.0;
  double grad_norm = 0.0;
  std::vector<double> probs;  // per observed state: probability of the base action
};

std::vector<PgTrainRow> train_sigmoid_policy(Environment& env, SigmoidPolicy& policy,
                                             const PgTrainConfig& config);

struct QLearnConfig {
  std::size_t episodes = 3000;
  std::size_t max_steps = 64;
  double alpha = 0.5;
  double gamma = 0.9;
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint64_t seed = 1;
};

struct QLearnResult {
  QTable table;
  Tensor visits;  // per (state, action)
  std::vector<double> episode_returns;
};

QLearnResult train_q_learning(Environment& env, std::size_t n_states, const QLearnConfig& config);

}  // namespace qflrl::rl
