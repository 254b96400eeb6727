#include <algorithm>
#include <cmath>

#include "qflrl/nn.hpp"

namespace qflrl::nn {

Gradients finite_diff_gradient(Network net, const Tensor& x, const Tensor& target, Loss loss,
                               double h) {
  Gradients g = zeros_like_params(net);
  auto probe = [&](Tensor& param, Tensor& out, std::size_t i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = loss_eval(forward(net, x).output(), target, loss);
    param[i] = saved - h;
    const double down = loss_eval(forward(net, x).output(), target, loss);
    param[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  };
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    for (std::size_t i = 0; i < net.weights()[li].size(); ++i)
      probe(net.weights()[li], g.w[li], i);
    for (std::size_t i = 0; i < net.biases()[li].size(); ++i)
      probe(net.biases()[li], g.b[li], i);
  }
  return g;
}

double gradient_check_error(const Network& net, const Tensor& x, const Tensor& target, Loss loss,
                            double h) {
  const ForwardTrace trace = forward(net, x);
  const Gradients analytic = backprop(net, trace, target, loss);
  const Gradients numeric = finite_diff_gradient(net, x, target, loss, h);
  double worst = 0.0;
  auto compare = [&](const Tensor& a, const Tensor& n) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ga = a[i], gn = n[i];
      const double denom = std::max({1.0, std::fabs(ga), std::fabs(gn)});
      worst = std::max(worst, std::fabs(ga - gn) / denom);
    }
  };
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    compare(analytic.w[li], numeric.w[li]);
    compare(analytic.b[li], numeric.b[li]);
  }
  return worst;
}

namespace {

Activation random_hidden_activation(RngStream& rng) {
  const double u = rng.uniform01();
  if (u < 1.0 / 3.0) return Activation::Sigmoid;
  if (u < 2.0 / 3.0) return Activation::Relu;
  return Activation::Linear;
}

}  // namespace

std::vector<GradCheckCase> gradient_check_suite(std::uint64_t seed, std::size_t n_cases) {
  std::vector<GradCheckCase> report;
  for (std::size_t c = 0; c < n_cases; ++c) {
    RngStream rng(seed, c);
    const bool conv_case = c % 4 == 3;  // every fourth case exercises conv/pool/flatten
    const bool ce_case = c % 2 == 1;    // alternate the two losses

    std::vector<LayerSpec> layers;
    std::vector<std::size_t> input_shape;
    std::size_t flat = 0;
    if (conv_case) {
      const std::size_t c_in = 1 + rng.next_u64() % 2;
      const std::size_t len = 8;
      input_shape = {c_in, len};
      const std::size_t c_mid = 1 + rng.next_u64() % 3;
      const Padding pad = rng.bernoulli(0.5) ? Padding::Periodic : Padding::Zero;
      layers.push_back(LayerSpec::conv1d(c_in, c_mid, 1 + rng.next_u64() % 2,
                                         random_hidden_activation(rng), pad));
      layers.push_back(LayerSpec::avg_pool(2));
      layers.push_back(LayerSpec::flatten());
      flat = c_mid * (len / 2);
    } else {
      const std::size_t n_in = 2 + rng.next_u64() % 5;
      input_shape = {n_in};
      flat = n_in;
      const std::size_t n_hidden_layers = 1 + rng.next_u64() % 3;
      for (std::size_t l = 0; l < n_hidden_layers; ++l) {
        const std::size_t width = 2 + rng.next_u64() % 29;
        layers.push_back(LayerSpec::dense(flat, width, random_hidden_activation(rng)));
        flat = width;
      }
    }
    const std::size_t n_out = 2 + rng.next_u64() % 4;
    layers.push_back(LayerSpec::dense(flat, n_out,
                                      ce_case ? Activation::Softmax : random_hidden_activation(rng)));

    Network net = Network::create(input_shape, layers, rng);

    const std::size_t batch = 1 + rng.next_u64() % 3;
    std::vector<std::size_t> xshape{batch};
    xshape.insert(xshape.end(), input_shape.begin(), input_shape.end());
    Tensor x(xshape);
    for (double& v : x.values()) v = rng.gaussian(0.0, 1.0);
    Tensor target({batch, n_out});
    if (ce_case) {
      for (std::size_t s = 0; s < batch; ++s)
        target.at(s, rng.next_u64() % n_out) = 1.0;  // one-hot rows
    } else {
      for (double& v : target.values()) v = rng.gaussian(0.0, 1.0);
    }

    GradCheckCase item;
    item.param_count = net.param_count();
    item.description = (conv_case ? std::string("conv1d/pool/flatten") : std::string("dense")) +
                       (ce_case ? "+softmax/cross-entropy" : "+quadratic");
    item.max_rel_error = gradient_check_error(net, x, target,
                                              ce_case ? Loss::CategoricalCrossEntropy
                                                      : Loss::Quadratic);
    report.push_back(std::move(item));
  }
  return report;
}

}  // namespace qflrl::nn
