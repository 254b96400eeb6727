#include "qflrl/rl.hpp"

#include <algorithm>
#include <cmath>

namespace qflrl::rl {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double SigmoidPolicy::prob(int obs, int action) const {
  const double p = sigmoid(theta[static_cast<std::size_t>(obs)]);
  return action == base_action[static_cast<std::size_t>(obs)] ? p : 1.0 - p;
}

int SigmoidPolicy::sample(int obs, RngStream& rng) const {
  const int base = base_action[static_cast<std::size_t>(obs)];
  return rng.bernoulli(sigmoid(theta[static_cast<std::size_t>(obs)])) ? base : 1 - base;
}

double SigmoidPolicy::log_grad(int obs, int action) const {
  const double p = sigmoid(theta[static_cast<std::size_t>(obs)]);
  return action == base_action[static_cast<std::size_t>(obs)] ? 1.0 - p : -p;
}

Trajectory sample_trajectory(Environment& env, const PolicyFn& policy, std::size_t steps,
                             RngStream& rng) {
  if (steps < 1) throw InvalidInput("sample_trajectory: need at least one step");
  Trajectory traj;
  std::int64_t state = env.reset(rng);
  for (std::size_t t = 0; t < steps; ++t) {
    const int obs = env.observation(state);
    const int action = policy(obs, rng);
    const StepResult r = env.step(state, action, rng);
    traj.observations.push_back(obs);
    traj.actions.push_back(action);
    traj.rewards.push_back(r.reward);
    traj.total_return += r.reward;
    state = r.next_state;
    if (r.done) break;
  }
  return traj;
}

PolicyGradientDiagnostics policy_gradient_update(const std::vector<Trajectory>& batch,
                                                 SigmoidPolicy& policy, double eta,
                                                 Baseline baseline) {
  if (batch.empty()) throw InvalidInput("policy_gradient_update: empty batch");
  double mean_return = 0.0;
  for (const Trajectory& traj : batch) mean_return += traj.total_return;
  mean_return /= static_cast<double>(batch.size());
  const double b = baseline == Baseline::BatchMean ? mean_return : 0.0;

  std::vector<double> grad(policy.theta.size(), 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Trajectory& traj = batch[k];
    const double weight = traj.total_return - b;
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      if (!std::isfinite(weight))
        throw NumericalError("policy_gradient_update: non-finite return in trajectory " +
                             std::to_string(k));
      grad[static_cast<std::size_t>(traj.observations[t])] +=
          weight * policy.log_grad(traj.observations[t], traj.actions[t]);
    }
  }
  double norm_sq = 0.0;
  for (std::size_t s = 0; s < grad.size(); ++s) {
    grad[s] /= static_cast<double>(batch.size());
    if (!std::isfinite(grad[s]))
      throw NumericalError("policy_gradient_update: non-finite gradient for state " +
                           std::to_string(s));
    norm_sq += grad[s] * grad[s];
    policy.theta[s] += eta * grad[s];
  }
  return {mean_return, std::sqrt(norm_sq)};
}

double walker_logpolicy_grad(double theta, int action) {
  if (action != 1 && action != -1)
    throw InvalidInput("walker_logpolicy_grad: action must be +1 or -1");
  const double p = sigmoid(theta);
  return action == 1 ? 1.0 - p : -p;
}

double walker_analytic_update(double eta, std::size_t steps, double theta) {
  if (steps < 1 || !(eta > 0.0)) throw InvalidInput("walker_analytic_update: bad parameters");
  const double p = sigmoid(theta);
  return 2.0 * eta * static_cast<double>(steps) * p * (1.0 - p);
}

QTable::QTable(std::size_t n_states, std::size_t n_actions, double gamma, double alpha)
    : q({n_states, n_actions}), gamma(gamma), alpha(alpha) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("QTable: gamma must lie in [0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("QTable: alpha must lie in (0,1)");
}

double QTable::max_q(std::size_t s) const {
  double best = q.at(s, 0);
  for (std::size_t a = 1; a < q.extent(1); ++a) best = std::max(best, q.at(s, a));
  return best;
}

int QTable::argmax_action(std::size_t s) const {
  int best = 0;
  for (std::size_t a = 1; a < q.extent(1); ++a)
    if (q.at(s, a) > q.at(s, static_cast<std::size_t>(best))) best = static_cast<int>(a);
  return best;
}

void q_update(QTable& table, std::size_t s, int a, double r, std::size_t s_next, bool done) {
  if (s >= table.q.extent(0) || s_next >= table.q.extent(0) || a < 0 ||
      static_cast<std::size_t>(a) >= table.q.extent(1))
    throw InvalidInput("q_update: state or action index out of range");
  const double bootstrap = done ? 0.0 : table.gamma * table.max_q(s_next);
  double& cell = table.q.at(s, static_cast<std::size_t>(a));
  cell += table.alpha * (r + bootstrap - cell);
}

Tensor value_iteration_oracle(const FiniteMDP& mdp, double gamma, double tol) {
  if (mdp.n_states == 0 || mdp.n_actions == 0)
    throw InvalidInput("value_iteration_oracle: empty MDP");
  if (mdp.transitions.size() != mdp.n_states)
    throw InvalidInput("value_iteration_oracle: transition table incomplete");
  Tensor q({mdp.n_states, mdp.n_actions});
  for (;;) {
    double worst = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        const FiniteMDP::Transition& tr = mdp.transitions[s][a];
        double target = tr.reward;
        if (!tr.done) {
          double best = q.at(tr.next, 0);
          for (std::size_t a2 = 1; a2 < mdp.n_actions; ++a2)
            best = std::max(best, q.at(tr.next, a2));
          target += gamma * best;
        }
        worst = std::max(worst, std::fabs(target - q.at(s, a)));
        q.at(s, a) = target;
      }
    if (worst < tol) break;
  }
  return q;
}

Tensor value_iteration_for_env(const Environment& env, double gamma, double tol) {
  const std::optional<FiniteMDP> mdp = env.enumerate();
  if (!mdp) throw InvalidInput("value iteration: environment is not enumerable");
  return value_iteration_oracle(*mdp, gamma, tol);
}

std::vector<bool> reachable_states(const FiniteMDP& mdp, std::size_t start) {
  std::vector<bool> seen(mdp.n_states, false);
  std::vector<std::size_t> frontier{start};
  seen[start] = true;
  while (!frontier.empty()) {
    const std::size_t s = frontier.back();
    frontier.pop_back();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const FiniteMDP::Transition& tr = mdp.transitions[s][a];
      if (tr.done) continue;
      if (!seen[tr.next]) {
        seen[tr.next] = true;
        frontier.push_back(tr.next);
      }
    }
  }
  return seen;
}

int epsilon_greedy(const QTable& table, std::size_t s, double epsilon, RngStream& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon_greedy: bad epsilon");
  if (epsilon > 0.0 && rng.uniform01() < epsilon)
    return static_cast<int>(rng.next_u64() % table.q.extent(1));
  return table.argmax_action(s);
}

// --- WalkerEnv ---
// state packs (t, x): upper 32 bits time, lower 32 bits position + offset

namespace {
constexpr std::int64_t kXOffset = 1 << 20;
}

std::int64_t WalkerEnv::reset(RngStream&) { return kXOffset; }

int WalkerEnv::position(std::int64_t state) {
  return static_cast<int>((state & 0xffffffffLL) - kXOffset);
}

int WalkerEnv::time(std::int64_t state) { return static_cast<int>(state >> 32); }

StepResult WalkerEnv::step(std::int64_t state, int action, RngStream&) {
  if (action != 0 && action != 1) throw InvalidInput("WalkerEnv: action must be 0 or 1");
  const int x = position(state) + (action == 0 ? 1 : -1);
  const int t = time(state) + 1;
  StepResult r;
  r.next_state = (static_cast<std::int64_t>(t) << 32) | (x + kXOffset);
  r.done = static_cast<std::size_t>(t) >= horizon_;
  r.reward = r.done ? static_cast<double>(x) : 0.0;  // return x(T) as one terminal reward
  return r;
}

// --- WalkerTargetEnv ---
// state packs (t, target, x)

std::int64_t WalkerTargetEnv::reset(RngStream& rng) {
  const int target = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(x_max_));
  return static_cast<std::int64_t>(target) << 20;  // x = 0, t = 0
}

int WalkerTargetEnv::observation(std::int64_t state) const {
  const int x = static_cast<int>(state & 0xfffff);
  const int target = static_cast<int>((state >> 20) & 0xfffff);
  return x == target ? 1 : 0;
}

StepResult WalkerTargetEnv::step(std::int64_t state, int action, RngStream&) {
  if (action != 0 && action != 1) throw InvalidInput("WalkerTargetEnv: action must be 0 or 1");
  const int x = static_cast<int>(state & 0xfffff) + (action == 0 ? 1 : 0);
  const int target = static_cast<int>((state >> 20) & 0xfffff);
  const int t = static_cast<int>(state >> 40) + 1;
  StepResult r;
  r.next_state = (static_cast<std::int64_t>(t) << 40) |
                 (static_cast<std::int64_t>(target) << 20) | x;
  r.reward = x == target ? 1.0 : 0.0;  // a step ending on the target counts
  r.done = static_cast<std::size_t>(t) >= horizon_;
  return r;
}

// --- GridworldBoxEnv ---
// state index = cell * 2^n_boxes + remaining-boxes mask

GridworldBoxEnv::GridworldBoxEnv(std::size_t height, std::size_t width, std::size_t start_cell,
                                 std::vector<std::size_t> box_cells)
    : height_(height), width_(width), start_cell_(start_cell), box_cells_(std::move(box_cells)) {
  if (box_cells_.empty() || box_cells_.size() > 8)
    throw InvalidInput("GridworldBoxEnv: between 1 and 8 boxes");
  if (start_cell_ >= height_ * width_) throw InvalidInput("GridworldBoxEnv: bad start cell");
  for (std::size_t c : box_cells_)
    if (c >= height_ * width_) throw InvalidInput("GridworldBoxEnv: bad box cell");
}

std::size_t GridworldBoxEnv::start_state_index() const {
  std::size_t mask = n_masks() - 1;
  // a box on the start cell is collected immediately
  for (std::size_t b = 0; b < box_cells_.size(); ++b)
    if (box_cells_[b] == start_cell_) mask &= ~(std::size_t{1} << b);
  return start_cell_ * n_masks() + mask;
}

std::int64_t GridworldBoxEnv::reset(RngStream&) {
  return static_cast<std::int64_t>(start_state_index());
}

int GridworldBoxEnv::observation(std::int64_t state) const { return static_cast<int>(state); }

int GridworldBoxEnv::observation_count() const {
  return static_cast<int>(height_ * width_ * n_masks());
}

StepResult GridworldBoxEnv::step_index(std::size_t index, int action) const {
  const std::size_t mask = index % n_masks();
  const std::size_t cell = index / n_masks();
  std::size_t row = cell / width_, col = cell % width_;
  switch (action) {
    case 0: row = row > 0 ? row - 1 : row; break;              // N
    case 1: row = row + 1 < height_ ? row + 1 : row; break;    // S
    case 2: col = col > 0 ? col - 1 : col; break;              // W
    case 3: col = col + 1 < width_ ? col + 1 : col; break;     // E
    default: throw InvalidInput("GridworldBoxEnv: action must be in {0,1,2,3}");
  }
  const std::size_t next_cell = row * width_ + col;
  std::size_t next_mask = mask;
  double reward = 0.0;
  for (std::size_t b = 0; b < box_cells_.size(); ++b)
    if ((next_mask & (std::size_t{1} << b)) && box_cells_[b] == next_cell) {
      next_mask &= ~(std::size_t{1} << b);
      reward += 1.0;
    }
  StepResult r;
  r.next_state = static_cast<std::int64_t>(next_cell * n_masks() + next_mask);
  r.reward = reward;
  r.done = next_mask == 0;
  return r;
}

StepResult GridworldBoxEnv::step(std::int64_t state, int action, RngStream&) {
  return step_index(static_cast<std::size_t>(state), action);
}

std::optional<FiniteMDP> GridworldBoxEnv::enumerate() const {
  FiniteMDP mdp;
  mdp.n_states = height_ * width_ * n_masks();
  mdp.n_actions = 4;
  mdp.transitions.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    mdp.transitions[s].resize(4);
    for (int a = 0; a < 4; ++a) {
      const StepResult r = step_index(s, a);
      mdp.transitions[s][static_cast<std::size_t>(a)] = {
          static_cast<std::size_t>(r.next_state), r.reward, r.done};
    }
  }
  return mdp;
}

// --- ChainEnv ---

StepResult ChainEnv::step(std::int64_t state, int action, RngStream&) {
  if (action != 0 && action != 1) throw InvalidInput("ChainEnv: action must be 0 or 1");
  const std::size_t s = static_cast<std::size_t>(state);
  StepResult r;
  if (s == reward_site_) {  // occupying the reward site pays out and ends the episode
    r.next_state = state;
    r.reward = 1.0;
    r.done = true;
    return r;
  }
  std::size_t next = s;
  if (action == 0 && s + 1 < length_) next = s + 1;
  if (action == 1 && s > 0) next = s - 1;
  r.next_state = static_cast<std::int64_t>(next);
  return r;
}

std::optional<FiniteMDP> ChainEnv::enumerate() const {
  FiniteMDP mdp;
  mdp.n_states = length_;
  mdp.n_actions = 2;
  mdp.transitions.resize(length_);
  ChainEnv copy = *this;
  RngStream unused(0);
  for (std::size_t s = 0; s < length_; ++s) {
    mdp.transitions[s].resize(2);
    for (int a = 0; a < 2; ++a) {
      const StepResult r = copy.step(static_cast<std::int64_t>(s), a, unused);
      mdp.transitions[s][static_cast<std::size_t>(a)] = {static_cast<std::size_t>(r.next_state),
                                                         r.reward, r.done};
    }
  }
  return mdp;
}

// --- training drivers ---

std::vector<PgTrainRow> train_sigmoid_policy(Environment& env, SigmoidPolicy& policy,
                                             const PgTrainConfig& config) {
  std::vector<PgTrainRow> rows;
  rows.reserve(config.updates);
  for (std::size_t update = 0; update < config.updates; ++update) {
    std::vector<Trajectory> batch(config.batch_size);
    for (std::size_t k = 0; k < config.batch_size; ++k) {
      RngStream rng(config.seed, update * config.batch_size + k);
      batch[k] = sample_trajectory(
          env, [&](int obs, RngStream& r) { return policy.sample(obs, r); }, config.horizon, rng);
    }
    const PolicyGradientDiagnostics diag =
        policy_gradient_update(batch, policy, config.eta, config.baseline);
    PgTrainRow row;
    row.update = update;
    row.mean_return = diag.mean_return;
    row.grad_norm = diag.grad_norm;
    for (std::size_t s = 0; s < policy.theta.size(); ++s)
      row.probs.push_back(policy.prob(static_cast<int>(s), policy.base_action[s]));
    rows.push_back(std::move(row));
  }
  return rows;
}

QLearnResult train_q_learning(Environment& env, std::size_t n_states, const QLearnConfig& config) {
  QLearnResult result{QTable(n_states, static_cast<std::size_t>(env.action_count()), config.gamma,
                             config.alpha),
                      Tensor({n_states, static_cast<std::size_t>(env.action_count())}),
                      {}};
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    RngStream rng(config.seed, episode);
    const double frac = config.episodes > 1
                            ? static_cast<double>(episode) / static_cast<double>(config.episodes - 1)
                            : 1.0;
    const double eps = config.eps_start + (config.eps_end - config.eps_start) * frac;
    std::int64_t state = env.reset(rng);
    double ep_return = 0.0;
    for (std::size_t t = 0; t < config.max_steps; ++t) {
      const std::size_t s = static_cast<std::size_t>(env.observation(state));
      const int a = epsilon_greedy(result.table, s, eps, rng);
      const StepResult r = env.step(state, a, rng);
      const std::size_t s_next = static_cast<std::size_t>(env.observation(r.next_state));
      q_update(result.table, s, a, r.reward, s_next, r.done);
      result.visits.at(s, static_cast<std::size_t>(a)) += 1.0;
      ep_return += r.reward;
      state = r.next_state;
      if (r.done) break;
    }
    result.episode_returns.push_back(ep_return);
  }
  return result;
}

}  // namespace qflrl::rl
