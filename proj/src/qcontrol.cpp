#include "qflrl/qcontrol.hpp"

#include <algorithm>
#include <cmath>

#include "qflrl/parallel.hpp"

namespace qflrl::qcontrol {

void ControlConfig::finalize() {
  if (amplitude_grid.empty()) {
    // 9 real amplitudes uniform in [-2, 2]
    for (int k = 0; k < 9; ++k)
      amplitude_grid.push_back(cdouble{-2.0 + 0.5 * static_cast<double>(k), 0.0});
  }
  if (amplitude_grid.size() < 2) throw InvalidInput("ControlConfig: need at least 2 amplitudes");
  if (window < 1) throw InvalidInput("ControlConfig: window must be at least 1");
  if (batch_size < 1) throw InvalidInput("ControlConfig: empty batch");
  if (target_fock >= sme.n_cutoff) throw InvalidInput("ControlConfig: target beyond cutoff");
  sme.validate();
  // inputs standardized to O(1): center on the target's signal level and
  // divide by twice the per-step signal spread
  if (sme.kappa_prime > 0.0) {
    obs_shift = std::sqrt(sme.kappa_prime) * 2.0 * static_cast<double>(target_fock);
    obs_scale = 1.0 / (2.0 * std::sqrt(sme.kappa_prime / sme.dt));
  } else {
    obs_shift = 0.0;
    obs_scale = std::sqrt(sme.dt) / 2.0;
  }
}

ControlConfig ControlConfig::defaults() {
  ControlConfig c;
  c.sme.kappa = 1.0;
  c.sme.kappa_prime = 0.5;
  c.sme.dt = 0.2;
  c.sme.substeps = 200;
  c.sme.measurement = qsim::MeasurementOp::Number;
  c.sme.n_cutoff = 8;
  c.finalize();
  return c;
}

double EpisodeBatch::mean_return() const {
  double m = 0.0;
  for (double r : returns) m += r;
  return m / static_cast<double>(returns.size());
}

double EpisodeBatch::return_std() const {
  const double m = mean_return();
  double v = 0.0;
  for (double r : returns) v += (r - m) * (r - m);
  return std::sqrt(v / static_cast<double>(returns.size()));
}

double EpisodeBatch::mean_final_reward() const {
  double m = 0.0;
  for (std::size_t k = 0; k < n_traj; ++k) m += rewards[k * steps + steps - 1];
  return m / static_cast<double>(n_traj);
}

Tensor build_observation(const std::vector<double>& signal_steps, std::size_t window,
                         double shift, double scale) {
  Tensor obs({1, window});
  const std::size_t have = signal_steps.size();
  for (std::size_t i = 0; i < window; ++i) {
    // slot window-1 holds the most recent value; missing history stays 0
    if (i + have >= window) {
      const double x = signal_steps[have - (window - i)];
      obs[i] = (x - shift) * scale;
    }
  }
  return obs;
}

nn::Network make_policy_network(const ControlConfig& config, RngStream& rng) {
  std::vector<nn::LayerSpec> layers;
  std::size_t width = config.window;
  for (std::size_t h : config.hidden_layers) {
    layers.push_back(nn::LayerSpec::dense(width, h, nn::Activation::Relu));
    width = h;
  }
  layers.push_back(nn::LayerSpec::dense(width, config.amplitude_grid.size(),
                                        nn::Activation::Softmax));
  return nn::Network::create({config.window}, std::move(layers), rng);
}

EpisodeBatch run_episode_batch(const nn::Network& policy, const ControlConfig& config,
                               std::uint64_t stream_offset) {
  const std::size_t n = config.batch_size, steps = config.episode_steps, w = config.window;
  EpisodeBatch batch;
  batch.n_traj = n;
  batch.steps = steps;
  batch.window = w;
  batch.observations = Tensor({n * steps, w});
  batch.actions.assign(n * steps, 0);
  batch.rewards.assign(n * steps, 0.0);
  batch.returns.assign(n, 0.0);
  std::vector<std::size_t> leakage(n, 0);

  parallel_for(
      n,
      [&](std::size_t k) {
        RngStream rng(config.seed, stream_offset + k);
        qsim::FockDensityMatrix state = qsim::FockDensityMatrix::vacuum(config.sme.n_cutoff);
        std::vector<double> signal_steps;
        signal_steps.reserve(steps);
        double total = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
          const Tensor obs =
              build_observation(signal_steps, w, config.obs_shift, config.obs_scale);
          const Tensor probs = nn::forward(policy, obs).output();
          const std::size_t action = rng.categorical({probs.data(), probs.size()});
          const cdouble alpha = config.amplitude_grid[action];
          qsim::SmeStepResult step;
          try {
            step = qsim::sme_step(state, config.sme, alpha, rng);
          } catch (const NumericalError& e) {
            throw NumericalError("trajectory " + std::to_string(stream_offset + k) + ": " +
                                 e.what());
          }
          leakage[k] += step.leakage_warnings;
          double x_avg = 0.0;
          for (const qsim::MeasurementSample& s : step.signal) x_avg += s.x;
          x_avg /= static_cast<double>(step.signal.size());
          signal_steps.push_back(x_avg);

          const double reward = qsim::fock_overlap(state, config.target_fock);
          const std::size_t row = k * steps + t;
          for (std::size_t i = 0; i < w; ++i) batch.observations.at(row, i) = obs[i];
          batch.actions[row] = static_cast<int>(action);
          batch.rewards[row] = reward;
          total += reward;
        }
        batch.returns[k] = total;
      },
      config.threads);

  for (std::size_t w_count : leakage) batch.leakage_warnings += w_count;
  return batch;
}

TrainLogRow reinforce_step(nn::Network& policy, nn::Optimizer& opt, const EpisodeBatch& batch,
                           const ControlConfig& config) {
  const std::size_t n_actions = config.amplitude_grid.size();
  const std::size_t rows = batch.n_traj * batch.steps;

  const double mean_ret = batch.mean_return();
  const double baseline = config.baseline == rl::Baseline::BatchMean ? mean_ret : 0.0;

  // log-softmax surrogate: the gradient of the per-row cross-entropy against
  // the chosen action is -d ln pi(a_t); weighting rows by (R - b)/N and
  // negating the result gives the ascent direction.
  Tensor targets({rows, n_actions});
  std::vector<double> weights(rows);
  for (std::size_t k = 0; k < batch.n_traj; ++k) {
    const double w = (batch.returns[k] - baseline) / static_cast<double>(batch.n_traj);
    for (std::size_t t = 0; t < batch.steps; ++t) {
      const std::size_t row = k * batch.steps + t;
      targets.at(row, static_cast<std::size_t>(batch.actions[row])) = 1.0;
      weights[row] = w;
    }
  }
  const nn::ForwardTrace trace = nn::forward(policy, batch.observations);
  nn::Gradients grads = nn::backprop_weighted(policy, trace, targets,
                                              nn::Loss::CategoricalCrossEntropy, weights);
  grads *= -1.0;  // descend on the surrogate = ascend on the expected return

  try {
    nn::optimizer_step(opt, policy, grads);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("reinforce_step: ") + e.what());
  }

  TrainLogRow row;
  row.mean_return = mean_ret;
  row.return_std = batch.return_std();
  row.mean_final_p_target = batch.mean_final_reward();
  row.action_histogram.assign(n_actions, 0);
  for (int a : batch.actions) row.action_histogram[static_cast<std::size_t>(a)] += 1;
  return row;
}

TrainResult train(const ControlConfig& config) {
  RngStream init_rng(config.seed, 0x7fffffffffffffffULL);
  TrainResult result;
  result.final_policy = make_policy_network(config, init_rng);
  result.best_policy = result.final_policy;
  result.best_mean_return = -1.0;
  nn::Optimizer opt =
      config.use_adam ? nn::Optimizer::adam(config.eta) : nn::Optimizer::sgd(config.eta);
  // sgd descends; reinforce_step already negates, so both kinds ascend

  for (std::size_t update = 0; update < config.updates; ++update) {
    const EpisodeBatch batch =
        run_episode_batch(result.final_policy, config, update * config.batch_size);
    result.leakage_warnings += batch.leakage_warnings;
    TrainLogRow row = reinforce_step(result.final_policy, opt, batch, config);
    row.update = update;
    if (row.mean_return > result.best_mean_return) {
      result.best_mean_return = row.mean_return;
      result.best_policy = result.final_policy;
    }
    result.log.push_back(std::move(row));
  }
  return result;
}

double best_constant_drive(const ControlConfig& config, std::vector<double>* per_amplitude) {
  double best = 0.0;
  if (per_amplitude) per_amplitude->clear();
  for (const cdouble& alpha : config.amplitude_grid) {
    qsim::FockDensityMatrix state = qsim::FockDensityMatrix::vacuum(config.sme.n_cutoff);
    double acc = 0.0;
    for (std::size_t t = 0; t < config.episode_steps; ++t) {
      qsim::lindblad_step(state, config.sme, alpha);
      acc += qsim::fock_overlap(state, config.target_fock);
    }
    const double avg = acc / static_cast<double>(config.episode_steps);
    if (per_amplitude) per_amplitude->push_back(avg);
    best = std::max(best, avg);
  }
  return best;
}

double evaluate_policy(const nn::Network& policy, const ControlConfig& config, std::size_t n_traj,
                       std::uint64_t stream_offset) {
  ControlConfig eval = config;
  eval.batch_size = n_traj;
  const EpisodeBatch batch = run_episode_batch(policy, eval, stream_offset);
  double acc = 0.0;
  for (double r : batch.returns) acc += r / static_cast<double>(batch.steps);
  return acc / static_cast<double>(n_traj);
}

double observation_sensitivity(const nn::Network& policy, std::size_t window, std::size_t n_probe,
                               std::uint64_t seed) {
  RngStream rng(seed, 99);
  Tensor probes({n_probe, window});
  for (double& v : probes.values()) v = rng.gaussian(0.0, 1.0);
  const Tensor probs = nn::forward(policy, probes).output();
  const std::size_t n_actions = probs.extent(1);
  double total = 0.0;
  for (std::size_t a = 0; a < n_actions; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_probe; ++i) mean += probs.at(i, a);
    mean /= static_cast<double>(n_probe);
    double var = 0.0;
    for (std::size_t i = 0; i < n_probe; ++i)
      var += (probs.at(i, a) - mean) * (probs.at(i, a) - mean);
    total += var / static_cast<double>(n_probe);
  }
  return total;
}

}  // namespace qflrl::qcontrol
