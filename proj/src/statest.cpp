#include "qflrl/statest.hpp"

#include <algorithm>
#include <cmath>

#include "qflrl/parallel.hpp"

namespace qflrl::statest {

double norm(const BlochVector& y) {
  return std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
}

MeasurementPlan::MeasurementPlan(std::vector<BlochVector> dirs) : directions(std::move(dirs)) {
  for (const BlochVector& n : directions)
    if (std::fabs(norm(n) - 1.0) > 1e-12)
      throw InvalidInput("MeasurementPlan: directions must be unit vectors");
}

MeasurementPlan MeasurementPlan::default_plan() {
  std::vector<BlochVector> dirs;
  for (int axis = 0; axis < 3; ++axis)
    for (int rep = 0; rep < 4; ++rep) {
      BlochVector n{0.0, 0.0, 0.0};
      n[static_cast<std::size_t>(axis)] = 1.0;
      dirs.push_back(n);
    }
  return MeasurementPlan(std::move(dirs));
}

BlochVector sample_state_uniform(RngStream& rng) {
  for (;;) {
    BlochVector y{rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
    const double r = norm(y);
    if (r > 1e-8) {
      for (double& c : y) c /= r;
      return y;
    }
  }
}

OutcomeString simulate_outcomes(const BlochVector& state, const MeasurementPlan& plan,
                                RngStream& rng) {
  if (norm(state) > 1.0 + 1e-9) throw InvalidInput("simulate_outcomes: state outside Bloch ball");
  OutcomeString x;
  x.reserve(plan.size());
  for (const BlochVector& n : plan.directions) {
    const double p = 0.5 * (1.0 + n[0] * state[0] + n[1] * state[1] + n[2] * state[2]);
    x.push_back(rng.bernoulli(std::clamp(p, 0.0, 1.0)));
  }
  return x;
}

namespace {

struct DirectionGroup {
  BlochVector direction;
  int ones = 0;
  int total = 0;
};

// outcomes along identical directions only enter through their counts
std::vector<DirectionGroup> group_outcomes(const OutcomeString& outcomes,
                                           const MeasurementPlan& plan) {
  std::vector<DirectionGroup> groups;
  for (std::size_t j = 0; j < plan.size(); ++j) {
    const BlochVector& n = plan.directions[j];
    DirectionGroup* g = nullptr;
    for (DirectionGroup& cand : groups)
      if (cand.direction == n) {
        g = &cand;
        break;
      }
    if (!g) {
      groups.push_back({n, 0, 0});
      g = &groups.back();
    }
    g->total += 1;
    g->ones += outcomes[j];
  }
  return groups;
}

double int_pow(double base, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= base;
  return r;
}

}  // namespace

BayesOracleResult bayes_oracle(const OutcomeString& outcomes, const MeasurementPlan& plan,
                               std::size_t n_mc, RngStream& rng) {
  if (outcomes.size() != plan.size()) throw InvalidInput("bayes_oracle: outcome length mismatch");
  if (plan.size() > 0 && n_mc < 10000)
    throw InvalidInput("bayes_oracle: need at least 10^4 Monte Carlo states");
  BayesOracleResult result;
  if (plan.size() == 0) return result;  // prior symmetry: the zero vector

  const std::vector<DirectionGroup> groups = group_outcomes(outcomes, plan);
  for (std::size_t attempt = 0; attempt < 6; ++attempt) {
    double wsum = 0.0, wsq = 0.0;
    BlochVector acc{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < n_mc; ++k) {
      const BlochVector y = sample_state_uniform(rng);
      double w = 1.0;
      for (const DirectionGroup& g : groups) {
        const double p = std::clamp(
            0.5 * (1.0 + g.direction[0] * y[0] + g.direction[1] * y[1] + g.direction[2] * y[2]),
            0.0, 1.0);
        w *= int_pow(p, g.ones) * int_pow(1.0 - p, g.total - g.ones);
      }
      wsum += w;
      wsq += w * w;
      for (int c = 0; c < 3; ++c) acc[static_cast<std::size_t>(c)] += w * y[static_cast<std::size_t>(c)];
    }
    result.effective_sample_size = wsq > 0.0 ? wsum * wsum / wsq : 0.0;
    if (result.effective_sample_size >= 100.0) {
      for (int c = 0; c < 3; ++c) result.estimate[static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)] / wsum;
      return result;
    }
    n_mc *= 2;
    result.ess_warnings += 1;
  }
  throw NumericalError("bayes_oracle: effective sample size stayed degenerate");
}

namespace {

void fill_dataset(const MeasurementPlan& plan, std::size_t n, RngStream& rng, Tensor& x,
                  Tensor& y) {
  const std::size_t m = plan.size();
  for (std::size_t s = 0; s < n; ++s) {
    const BlochVector state = sample_state_uniform(rng);
    const OutcomeString outcomes = simulate_outcomes(state, plan, rng);
    for (std::size_t j = 0; j < m; ++j) x.at(s, j) = static_cast<double>(outcomes[j]);
    for (std::size_t c = 0; c < 3; ++c) y.at(s, c) = state[c];
  }
}

double mse(const Tensor& pred, const Tensor& truth) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return acc / static_cast<double>(pred.extent(0));
}

}  // namespace

ReconstructorResult train_reconstructor(const MeasurementPlan& plan,
                                        const ReconstructorConfig& config) {
  const std::size_t m = plan.size();
  RngStream init_rng(config.seed, 0), data_rng(config.seed, 1), test_rng(config.seed, 2);

  std::vector<nn::LayerSpec> layers;
  std::size_t width = m;
  for (std::size_t h : config.hidden_layers) {
    layers.push_back(nn::LayerSpec::dense(width, h, nn::Activation::Relu));
    width = h;
  }
  layers.push_back(nn::LayerSpec::dense(width, 3, nn::Activation::Linear));

  ReconstructorResult result;
  result.net = nn::Network::create({m}, std::move(layers), init_rng);
  nn::Optimizer opt = nn::Optimizer::adam(config.learning_rate);

  Tensor x_test({config.test_size, m}), y_test({config.test_size, 3});
  fill_dataset(plan, config.test_size, test_rng, x_test, y_test);

  Tensor x({config.batch_size, m}), y({config.batch_size, 3});
  double tail_sum = 0.0;
  std::size_t tail_count = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    fill_dataset(plan, config.batch_size, data_rng, x, y);
    const double train_loss = nn::train_on_batch(result.net, x, y, nn::Loss::Quadratic, opt);
    if (step * 4 >= config.steps * 3) {
      tail_sum += train_loss;
      ++tail_count;
    }
    if (step % config.log_every == 0 || step + 1 == config.steps) {
      const double test = mse(nn::forward(result.net, x_test).output(), y_test);
      result.curve.push_back({step, train_loss, test});
    }
  }
  result.train_mse = tail_sum / static_cast<double>(std::max<std::size_t>(tail_count, 1));
  result.test_mse = mse(nn::forward(result.net, x_test).output(), y_test);

  // Bayes posterior mean on the same test set, one stream per sample
  std::vector<double> per_sample(config.test_size);
  parallel_for(
      config.test_size,
      [&](std::size_t s) {
        OutcomeString outcomes(m);
        for (std::size_t j = 0; j < m; ++j) outcomes[j] = static_cast<int>(x_test.at(s, j));
        RngStream oracle_rng(config.seed, 1000000 + s);
        const BayesOracleResult est = bayes_oracle(outcomes, plan, config.oracle_mc, oracle_rng);
        double err = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double d = est.estimate[c] - y_test.at(s, c);
          err += d * d;
        }
        per_sample[s] = err;
      },
      config.threads);
  double mean = 0.0;
  for (double e : per_sample) mean += e;
  mean /= static_cast<double>(config.test_size);
  double var = 0.0;
  for (double e : per_sample) var += (e - mean) * (e - mean);
  var /= static_cast<double>(config.test_size - 1);
  result.oracle_mse = mean;
  result.oracle_mse_stderr = std::sqrt(var / static_cast<double>(config.test_size));
  return result;
}

}  // namespace qflrl::statest
