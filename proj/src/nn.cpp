#include "qflrl/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

namespace qflrl::nn {

namespace {

std::atomic<std::uint64_t> g_clamp_warnings{0};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activation_deriv(Activation act, double z) {
  switch (act) {
    case Activation::Sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::Relu:
      return z > 0.0 ? 1.0 : 0.0;  // derivative at 0 defined as 0
    case Activation::Linear:
      return 1.0;
    case Activation::Softmax:
      throw InvalidInput("softmax has no elementwise derivative");
  }
  return 0.0;
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

const char* to_string(Loss l) {
  return l == Loss::Quadratic ? "quadratic" : "categorical_cross_entropy";
}

Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  if (s == "softmax") return Activation::Softmax;
  throw InvalidInput("unknown activation: " + s);
}

LayerSpec LayerSpec::dense(std::size_t n_in, std::size_t n_out, Activation act) {
  LayerSpec s;
  s.kind = Kind::Dense;
  s.n_in = n_in;
  s.n_out = n_out;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::conv1d(std::size_t c_in, std::size_t c_out, std::size_t half_width,
                            Activation act, Padding pad) {
  LayerSpec s;
  s.kind = Kind::Conv1d;
  s.channels_in = c_in;
  s.channels_out = c_out;
  s.half_width = half_width;
  s.activation = act;
  s.padding = pad;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t c_in, std::size_t c_out, std::size_t half_width,
                            Activation act, Padding pad) {
  LayerSpec s = conv1d(c_in, c_out, half_width, act, pad);
  s.kind = Kind::Conv2d;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t block) {
  LayerSpec s;
  s.kind = Kind::AvgPool;
  s.block = block;
  s.activation = Activation::Linear;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::Flatten;
  s.activation = Activation::Linear;
  return s;
}

Network Network::create(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers,
                        RngStream& rng) {
  if (layers.empty()) throw InvalidInput("network: no layers");
  Network net;
  net.input_shape_ = std::move(input_shape);
  net.layers_ = std::move(layers);
  net.shapes_.push_back(net.input_shape_);

  for (std::size_t li = 0; li < net.layers_.size(); ++li) {
    const LayerSpec& spec = net.layers_[li];
    const std::vector<std::size_t>& in = net.shapes_.back();
    std::vector<std::size_t> out;
    Tensor w, b;
    switch (spec.kind) {
      case LayerSpec::Kind::Dense: {
        if (in.size() != 1 || in[0] != spec.n_in)
          throw InvalidInput("dense layer " + std::to_string(li) + ": input extent mismatch");
        out = {spec.n_out};
        w = Tensor({spec.n_out, spec.n_in});
        b = Tensor({spec.n_out});
        const double std = 1.0 / std::sqrt(static_cast<double>(spec.n_in));
        for (double& v : w.values()) v = rng.gaussian(0.0, std);
        break;
      }
      case LayerSpec::Kind::Conv1d: {
        if (in.size() != 2 || in[0] != spec.channels_in)
          throw InvalidInput("conv1d layer " + std::to_string(li) + ": expects [channels, length]");
        out = {spec.channels_out, in[1]};
        const std::size_t k = 2 * spec.half_width + 1;
        w = Tensor({spec.channels_out, spec.channels_in, k});
        b = Tensor({spec.channels_out});
        const double std = 1.0 / std::sqrt(static_cast<double>(spec.channels_in * k));
        for (double& v : w.values()) v = rng.gaussian(0.0, std);
        break;
      }
      case LayerSpec::Kind::Conv2d: {
        if (in.size() != 3 || in[0] != spec.channels_in)
          throw InvalidInput("conv2d layer " + std::to_string(li) +
                             ": expects [channels, height, width]");
        out = {spec.channels_out, in[1], in[2]};
        const std::size_t k = 2 * spec.half_width + 1;
        w = Tensor({spec.channels_out, spec.channels_in, k, k});
        b = Tensor({spec.channels_out});
        const double std = 1.0 / std::sqrt(static_cast<double>(spec.channels_in * k * k));
        for (double& v : w.values()) v = rng.gaussian(0.0, std);
        break;
      }
      case LayerSpec::Kind::AvgPool: {
        if (spec.block == 0) throw InvalidInput("avg_pool: block must be positive");
        if (in.size() == 2) {
          if (in[1] % spec.block != 0)
            throw InvalidInput("avg_pool: block does not divide spatial extent");
          out = {in[0], in[1] / spec.block};
        } else if (in.size() == 3) {
          if (in[1] % spec.block != 0 || in[2] % spec.block != 0)
            throw InvalidInput("avg_pool: block does not divide spatial extent");
          out = {in[0], in[1] / spec.block, in[2] / spec.block};
        } else {
          throw InvalidInput("avg_pool: expects [channels, length] or [channels, h, w]");
        }
        break;
      }
      case LayerSpec::Kind::Flatten: {
        out = {shape_product(in)};
        break;
      }
    }
    if (spec.activation == Activation::Softmax) {
      if (li + 1 != net.layers_.size())
        throw InvalidInput("softmax is only permitted on the output layer");
      if (spec.kind != LayerSpec::Kind::Dense)
        throw InvalidInput("softmax requires a dense output layer");
    }
    net.weights_.push_back(std::move(w));
    net.biases_.push_back(std::move(b));
    net.shapes_.push_back(std::move(out));
  }
  return net;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) n += weights_[i].size() + biases_[i].size();
  return n;
}

std::vector<double> Network::flatten_params() const {
  std::vector<double> theta;
  theta.reserve(param_count());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    theta.insert(theta.end(), weights_[i].values().begin(), weights_[i].values().end());
    theta.insert(theta.end(), biases_[i].values().begin(), biases_[i].values().end());
  }
  return theta;
}

void Network::unflatten_params(const std::vector<double>& theta) {
  if (theta.size() != param_count()) throw InvalidInput("unflatten_params: length mismatch");
  std::size_t off = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::copy_n(theta.begin() + off, weights_[i].size(), weights_[i].values().begin());
    off += weights_[i].size();
    std::copy_n(theta.begin() + off, biases_[i].size(), biases_[i].values().begin());
    off += biases_[i].size();
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const Tensor& t : w) s += t.squared_norm();
  for (const Tensor& t : b) s += t.squared_norm();
  return s;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i].size()) w[i] += other.w[i];
    if (b[i].size()) b[i] += other.b[i];
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (Tensor& t : w) t *= s;
  for (Tensor& t : b) t *= s;
  return *this;
}

Gradients zeros_like_params(const Network& net) {
  Gradients g;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    g.w.push_back(Tensor(net.weights()[i].shape()));
    g.b.push_back(Tensor(net.biases()[i].shape()));
  }
  return g;
}

namespace {

// index helpers for conv layers; -1 marks a zero-padded position
inline long wrap_index(long i, long n, Padding pad) {
  if (i >= 0 && i < n) return i;
  if (pad == Padding::Periodic) {
    i %= n;
    return i < 0 ? i + n : i;
  }
  return -1;
}

void dense_forward(const LayerSpec&, const Tensor& w, const Tensor& b, const Tensor& in,
                   Tensor& z) {
  const std::size_t batch = in.extent(0), n_in = in.extent(1), n_out = z.extent(1);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* x = in.data() + s * n_in;
    double* out = z.data() + s * n_out;
    for (std::size_t j = 0; j < n_out; ++j) {
      const double* wj = w.data() + j * n_in;
      double acc = b[j];
      for (std::size_t k = 0; k < n_in; ++k) acc += wj[k] * x[k];
      out[j] = acc;
    }
  }
}

void conv1d_forward(const LayerSpec& spec, const Tensor& w, const Tensor& b, const Tensor& in,
                    Tensor& z) {
  const std::size_t batch = in.extent(0);
  const long cin = static_cast<long>(spec.channels_in), cout = static_cast<long>(spec.channels_out);
  const long len = static_cast<long>(in.extent(2));
  const long d = static_cast<long>(spec.half_width);
  for (std::size_t s = 0; s < batch; ++s)
    for (long co = 0; co < cout; ++co)
      for (long i = 0; i < len; ++i) {
        double acc = b[static_cast<std::size_t>(co)];
        for (long ci = 0; ci < cin; ++ci)
          for (long o = -d; o <= d; ++o) {
            const long j = wrap_index(i - o, len, spec.padding);
            if (j < 0) continue;
            acc += w.at(co, ci, o + d) * in.data()[(s * cin + ci) * len + j];
          }
        z.data()[(s * cout + co) * len + i] = acc;
      }
}

void conv2d_forward(const LayerSpec& spec, const Tensor& w, const Tensor& b, const Tensor& in,
                    Tensor& z) {
  const std::size_t batch = in.extent(0);
  const long cin = static_cast<long>(spec.channels_in), cout = static_cast<long>(spec.channels_out);
  const long h = static_cast<long>(in.extent(2)), wd = static_cast<long>(in.extent(3));
  const long d = static_cast<long>(spec.half_width);
  for (std::size_t s = 0; s < batch; ++s)
    for (long co = 0; co < cout; ++co)
      for (long iy = 0; iy < h; ++iy)
        for (long ix = 0; ix < wd; ++ix) {
          double acc = b[static_cast<std::size_t>(co)];
          for (long ci = 0; ci < cin; ++ci)
            for (long oy = -d; oy <= d; ++oy) {
              const long jy = wrap_index(iy - oy, h, spec.padding);
              if (jy < 0) continue;
              for (long ox = -d; ox <= d; ++ox) {
                const long jx = wrap_index(ix - ox, wd, spec.padding);
                if (jx < 0) continue;
                acc += w.at(co, ci, oy + d, ox + d) *
                       in.data()[((s * cin + ci) * h + jy) * wd + jx];
              }
            }
          z.data()[((s * cout + co) * h + iy) * wd + ix] = acc;
        }
}

void avg_pool_forward(const LayerSpec& spec, const Tensor& in, Tensor& z,
                      const std::vector<std::size_t>& in_shape) {
  const std::size_t batch = in.extent(0);
  const std::size_t blk = spec.block;
  if (in_shape.size() == 2) {
    const std::size_t c = in_shape[0], len = in_shape[1], lo = len / blk;
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t i = 0; i < lo; ++i) {
          double acc = 0.0;
          for (std::size_t k = 0; k < blk; ++k)
            acc += in.data()[(s * c + ci) * len + i * blk + k];
          z.data()[(s * c + ci) * lo + i] = acc / static_cast<double>(blk);
        }
  } else {
    const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const std::size_t ho = h / blk, wo = w / blk;
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t iy = 0; iy < ho; ++iy)
          for (std::size_t ix = 0; ix < wo; ++ix) {
            double acc = 0.0;
            for (std::size_t ky = 0; ky < blk; ++ky)
              for (std::size_t kx = 0; kx < blk; ++kx)
                acc += in.data()[((s * c + ci) * h + iy * blk + ky) * w + ix * blk + kx];
            z.data()[((s * c + ci) * ho + iy) * wo + ix] = acc / static_cast<double>(blk * blk);
          }
  }
}

void apply_activation(Activation act, const Tensor& z, Tensor& y) {
  switch (act) {
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = sigmoid(z[i]);
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] > 0.0 ? z[i] : 0.0;
      break;
    case Activation::Linear:
      y = z;
      break;
    case Activation::Softmax: {
      const std::size_t batch = z.extent(0), m = z.extent(1);
      for (std::size_t s = 0; s < batch; ++s) {
        const double* zs = z.data() + s * m;
        double* ys = y.data() + s * m;
        double zmax = zs[0];
        for (std::size_t j = 1; j < m; ++j) zmax = std::max(zmax, zs[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          ys[j] = std::exp(zs[j] - zmax);
          sum += ys[j];
        }
        for (std::size_t j = 0; j < m; ++j) ys[j] /= sum;
      }
      break;
    }
  }
}

std::vector<std::size_t> batched(std::size_t batch, const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> s{batch};
  s.insert(s.end(), shape.begin(), shape.end());
  return s;
}

}  // namespace

ForwardTrace forward(const Network& net, const Tensor& x, RngStream* train_rng) {
  if (x.rank() < 1) throw InvalidInput("forward: input must be batched");
  {
    std::vector<std::size_t> expect = batched(x.extent(0), net.input_shape());
    if (x.shape() != expect) throw InvalidInput("forward: input shape does not match input layer");
  }
  const std::size_t batch = x.extent(0);
  ForwardTrace trace;
  trace.y.push_back(x);
  trace.z.resize(net.layers().size());
  trace.dropout_masks.resize(net.layers().size());

  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const LayerSpec& spec = net.layers()[li];
    const Tensor& in = trace.y.back();
    Tensor z(batched(batch, net.layer_output_shape(li)));
    switch (spec.kind) {
      case LayerSpec::Kind::Dense:
        dense_forward(spec, net.weights()[li], net.biases()[li], in, z);
        break;
      case LayerSpec::Kind::Conv1d:
        conv1d_forward(spec, net.weights()[li], net.biases()[li], in, z);
        break;
      case LayerSpec::Kind::Conv2d:
        conv2d_forward(spec, net.weights()[li], net.biases()[li], in, z);
        break;
      case LayerSpec::Kind::AvgPool: {
        std::vector<std::size_t> in_shape(in.shape().begin() + 1, in.shape().end());
        avg_pool_forward(spec, in, z, in_shape);
        break;
      }
      case LayerSpec::Kind::Flatten:
        z = Tensor(batched(batch, net.layer_output_shape(li)), in.values());
        break;
    }
    Tensor y(z.shape());
    apply_activation(spec.activation, z, y);
    if (spec.dropout_rate > 0.0 && train_rng != nullptr) {
      Tensor mask(y.shape());
      const double keep = 1.0 - spec.dropout_rate;
      for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = train_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
      trace.dropout_masks[li] = std::move(mask);
    }
    trace.z[li] = std::move(z);
    trace.y.push_back(std::move(y));
  }
  return trace;
}

std::uint64_t loss_clamp_warnings() { return g_clamp_warnings.load(); }

double loss_eval(const Tensor& output, const Tensor& target, Loss loss) {
  if (!output.same_shape(target)) throw InvalidInput("loss_eval: shape mismatch");
  if (output.rank() < 1 || output.extent(0) == 0) throw InvalidInput("loss_eval: empty batch");
  const std::size_t batch = output.extent(0);
  const std::size_t per = output.size() / batch;
  double total = 0.0;
  if (loss == Loss::Quadratic) {
    for (std::size_t i = 0; i < output.size(); ++i) {
      const double d = output[i] - target[i];
      total += d * d;
    }
  } else {
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t j = 0; j < per; ++j) {
        const double t = target[s * per + j];
        if (t == 0.0) continue;
        double p = output[s * per + j];
        if (p < 1e-12) {
          p = 1e-12;
          g_clamp_warnings.fetch_add(1);
        }
        total -= t * std::log(p);
      }
  }
  return total / static_cast<double>(batch);
}

namespace {

void check_loss_pairing(const Network& net, Loss loss) {
  const Activation out_act = net.layers().back().activation;
  if (loss == Loss::Quadratic && out_act == Activation::Softmax)
    throw InvalidInput("softmax with quadratic loss is not supported");
  if (loss == Loss::CategoricalCrossEntropy && out_act != Activation::Softmax)
    throw InvalidInput("categorical cross-entropy requires a softmax output layer");
}

}  // namespace

Gradients backprop_weighted(const Network& net, const ForwardTrace& trace, const Tensor& target,
                            Loss loss, std::span<const double> sample_weights) {
  check_loss_pairing(net, loss);
  const std::size_t n_layers = net.layers().size();
  if (trace.y.size() != n_layers + 1) throw InvalidInput("backprop: trace does not match network");
  const Tensor& out = trace.output();
  if (!out.same_shape(target)) throw InvalidInput("backprop: target shape mismatch");
  const std::size_t batch = out.extent(0);
  if (sample_weights.size() != batch) throw InvalidInput("backprop: one weight per sample required");
  const std::size_t per = out.size() / batch;

  Gradients grads = zeros_like_params(net);

  // deviation at the output layer, with respect to z of the last layer
  Tensor delta(out.shape());
  const Activation out_act = net.layers().back().activation;
  if (loss == Loss::CategoricalCrossEntropy) {
    // fused softmax rule: dC/dz_j = P_j - P^target_j
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t j = 0; j < per; ++j)
        delta[s * per + j] = sample_weights[s] * (out[s * per + j] - target[s * per + j]);
  } else {
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t j = 0; j < per; ++j) {
        const std::size_t i = s * per + j;
        double d = 2.0 * sample_weights[s] * (out[i] - target[i]);
        if (!trace.dropout_masks[n_layers - 1].size()) {
          delta[i] = d * activation_deriv(out_act, trace.z[n_layers - 1][i]);
        } else {
          d *= trace.dropout_masks[n_layers - 1][i];
          delta[i] = d * activation_deriv(out_act, trace.z[n_layers - 1][i]);
        }
      }
  }

  // walk down: accumulate parameter gradients, then push delta one layer lower
  for (std::size_t li = n_layers; li-- > 0;) {
    const LayerSpec& spec = net.layers()[li];
    const Tensor& y_prev = trace.y[li];
    Tensor dy_prev(y_prev.shape());

    switch (spec.kind) {
      case LayerSpec::Kind::Dense: {
        const std::size_t n_in = spec.n_in, n_out = spec.n_out;
        Tensor& gw = grads.w[li];
        Tensor& gb = grads.b[li];
        const Tensor& w = net.weights()[li];
        for (std::size_t s = 0; s < batch; ++s) {
          const double* ds = delta.data() + s * n_out;
          const double* ys = y_prev.data() + s * n_in;
          double* dys = dy_prev.data() + s * n_in;
          for (std::size_t j = 0; j < n_out; ++j) {
            const double dj = ds[j];
            if (dj == 0.0) continue;
            gb[j] += dj;
            double* gwj = gw.data() + j * n_in;
            const double* wj = w.data() + j * n_in;
            for (std::size_t k = 0; k < n_in; ++k) {
              gwj[k] += dj * ys[k];
              dys[k] += dj * wj[k];
            }
          }
        }
        break;
      }
      case LayerSpec::Kind::Conv1d: {
        const long cin = static_cast<long>(spec.channels_in);
        const long cout = static_cast<long>(spec.channels_out);
        const long len = static_cast<long>(y_prev.extent(2));
        const long d = static_cast<long>(spec.half_width);
        const Tensor& w = net.weights()[li];
        for (std::size_t s = 0; s < batch; ++s)
          for (long co = 0; co < cout; ++co)
            for (long i = 0; i < len; ++i) {
              const double di = delta.data()[(s * cout + co) * len + i];
              if (di == 0.0) continue;
              grads.b[li][static_cast<std::size_t>(co)] += di;
              for (long ci = 0; ci < cin; ++ci)
                for (long o = -d; o <= d; ++o) {
                  const long j = wrap_index(i - o, len, spec.padding);
                  if (j < 0) continue;
                  grads.w[li].at(co, ci, o + d) += di * y_prev.data()[(s * cin + ci) * len + j];
                  dy_prev.data()[(s * cin + ci) * len + j] += di * w.at(co, ci, o + d);
                }
            }
        break;
      }
      case LayerSpec::Kind::Conv2d: {
        const long cin = static_cast<long>(spec.channels_in);
        const long cout = static_cast<long>(spec.channels_out);
        const long h = static_cast<long>(y_prev.extent(2)), wd = static_cast<long>(y_prev.extent(3));
        const long d = static_cast<long>(spec.half_width);
        const Tensor& w = net.weights()[li];
        for (std::size_t s = 0; s < batch; ++s)
          for (long co = 0; co < cout; ++co)
            for (long iy = 0; iy < h; ++iy)
              for (long ix = 0; ix < wd; ++ix) {
                const double di = delta.data()[((s * cout + co) * h + iy) * wd + ix];
                if (di == 0.0) continue;
                grads.b[li][static_cast<std::size_t>(co)] += di;
                for (long ci = 0; ci < cin; ++ci)
                  for (long oy = -d; oy <= d; ++oy) {
                    const long jy = wrap_index(iy - oy, h, spec.padding);
                    if (jy < 0) continue;
                    for (long ox = -d; ox <= d; ++ox) {
                      const long jx = wrap_index(ix - ox, wd, spec.padding);
                      if (jx < 0) continue;
                      const std::size_t yi = ((s * cin + ci) * h + jy) * wd + jx;
                      grads.w[li].at(co, ci, oy + d, ox + d) += di * y_prev.values()[yi];
                      dy_prev.values()[yi] += di * w.at(co, ci, oy + d, ox + d);
                    }
                  }
              }
        break;
      }
      case LayerSpec::Kind::AvgPool: {
        const std::size_t blk = spec.block;
        if (y_prev.rank() == 3) {
          const std::size_t c = y_prev.extent(1), len = y_prev.extent(2), lo = len / blk;
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t ci = 0; ci < c; ++ci)
              for (std::size_t i = 0; i < lo; ++i) {
                const double di = delta.data()[(s * c + ci) * lo + i] / static_cast<double>(blk);
                for (std::size_t k = 0; k < blk; ++k)
                  dy_prev.data()[(s * c + ci) * len + i * blk + k] = di;
              }
        } else {
          const std::size_t c = y_prev.extent(1), h = y_prev.extent(2), w2 = y_prev.extent(3);
          const std::size_t ho = h / blk, wo = w2 / blk;
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t ci = 0; ci < c; ++ci)
              for (std::size_t iy = 0; iy < ho; ++iy)
                for (std::size_t ix = 0; ix < wo; ++ix) {
                  const double di = delta.data()[((s * c + ci) * ho + iy) * wo + ix] /
                                    static_cast<double>(blk * blk);
                  for (std::size_t ky = 0; ky < blk; ++ky)
                    for (std::size_t kx = 0; kx < blk; ++kx)
                      dy_prev.data()[((s * c + ci) * h + iy * blk + ky) * w2 + ix * blk + kx] = di;
                }
        }
        break;
      }
      case LayerSpec::Kind::Flatten:
        dy_prev = Tensor(y_prev.shape(), delta.values());
        break;
    }

    if (li == 0) break;
    // convert dL/dy^(li-1) into delta wrt z^(li-1)
    const LayerSpec& below = net.layers()[li - 1];
    delta = std::move(dy_prev);
    if (trace.dropout_masks[li - 1].size())
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= trace.dropout_masks[li - 1][i];
    if (below.activation != Activation::Linear)
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] *= activation_deriv(below.activation, trace.z[li - 1][i]);
  }
  return grads;
}

Gradients backprop(const Network& net, const ForwardTrace& trace, const Tensor& target,
                   Loss loss) {
  const std::size_t batch = trace.output().extent(0);
  std::vector<double> w(batch, 1.0 / static_cast<double>(batch));
  return backprop_weighted(net, trace, target, loss, w);
}

Optimizer Optimizer::sgd(double lr) {
  Optimizer o;
  o.kind = Kind::Sgd;
  o.lr = lr;
  return o;
}

Optimizer Optimizer::adam(double lr, double beta1, double beta2, double eps) {
  Optimizer o;
  o.kind = Kind::Adam;
  o.lr = lr;
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.eps = eps;
  return o;
}

namespace {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, const Optimizer& opt,
                 double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

}  // namespace

void optimizer_step(Optimizer& opt, Network& net, const Gradients& grads) {
  const std::size_t n_layers = net.layers().size();
  if (grads.w.size() != n_layers) throw InvalidInput("optimizer_step: gradient layout mismatch");
  for (std::size_t li = 0; li < n_layers; ++li) {
    if (!grads.w[li].same_shape(net.weights()[li]) || !grads.b[li].same_shape(net.biases()[li]))
      throw InvalidInput("optimizer_step: gradient shape mismatch at layer " + std::to_string(li));
    for (double g : grads.w[li].values())
      if (!std::isfinite(g))
        throw NumericalError("optimizer_step: non-finite weight gradient at layer " +
                             std::to_string(li));
    for (double g : grads.b[li].values())
      if (!std::isfinite(g))
        throw NumericalError("optimizer_step: non-finite bias gradient at layer " +
                             std::to_string(li));
  }

  if (opt.kind == Optimizer::Kind::Sgd) {
    opt.step_count += 1;
    for (std::size_t li = 0; li < n_layers; ++li) {
      for (std::size_t i = 0; i < net.weights()[li].size(); ++i)
        net.weights()[li][i] -= opt.lr * grads.w[li][i];
      for (std::size_t i = 0; i < net.biases()[li].size(); ++i)
        net.biases()[li][i] -= opt.lr * grads.b[li][i];
    }
    return;
  }

  if (opt.m_w.empty()) {
    for (std::size_t li = 0; li < n_layers; ++li) {
      opt.m_w.push_back(Tensor(net.weights()[li].shape()));
      opt.v_w.push_back(Tensor(net.weights()[li].shape()));
      opt.m_b.push_back(Tensor(net.biases()[li].shape()));
      opt.v_b.push_back(Tensor(net.biases()[li].shape()));
    }
  }
  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  for (std::size_t li = 0; li < n_layers; ++li) {
    adam_update(net.weights()[li], grads.w[li], opt.m_w[li], opt.v_w[li], opt, bc1, bc2);
    adam_update(net.biases()[li], grads.b[li], opt.m_b[li], opt.v_b[li], opt, bc1, bc2);
  }
}

double train_on_batch(Network& net, const Tensor& x, const Tensor& target, Loss loss,
                      Optimizer& opt, RngStream* dropout_rng) {
  if (x.extent(0) == 0) throw InvalidInput("train_on_batch: empty batch");
  ForwardTrace trace = forward(net, x, dropout_rng);
  const double pre_loss = loss_eval(trace.output(), target, loss);
  Gradients grads = backprop(net, trace, target, loss);
  optimizer_step(opt, net, grads);
  return pre_loss;
}

namespace {

Tensor rows_slice(const Tensor& t, std::size_t begin, std::size_t count) {
  const std::size_t per = t.size() / t.extent(0);
  std::vector<std::size_t> shape = t.shape();
  shape[0] = count;
  std::vector<double> data(t.values().begin() + begin * per,
                           t.values().begin() + (begin + count) * per);
  return Tensor(shape, std::move(data));
}

}  // namespace

FitResult fit_with_validation(const Network& net, const Tensor& x, const Tensor& y,
                              const FitOptions& options, Optimizer opt) {
  if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0))
    throw InvalidInput("fit_with_validation: split_fraction must be in (0,1)");
  const std::size_t n = x.extent(0);
  const std::size_t n_val = static_cast<std::size_t>(
      std::ceil(options.split_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n)
    throw InvalidInput("fit_with_validation: validation split is empty or swallows all data");

  const std::size_t n_train = n - n_val;
  const Tensor x_train = rows_slice(x, 0, n_train), y_train = rows_slice(y, 0, n_train);
  const Tensor x_val = rows_slice(x, n_train, n_val), y_val = rows_slice(y, n_train, n_val);

  Network current = net;
  FitResult result;
  result.best_net = net;
  double best_val = loss_eval(forward(net, x_val).output(), y_val, options.loss);
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    double train_loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t off = 0; off < n_train; off += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, n_train - off);
      train_loss_sum += train_on_batch(current, rows_slice(x_train, off, count),
                                       rows_slice(y_train, off, count), options.loss, opt);
      ++n_batches;
    }
    result.train_curve.push_back(train_loss_sum / static_cast<double>(n_batches));
    const double val_loss = loss_eval(forward(current, x_val).output(), y_val, options.loss);
    result.val_curve.push_back(val_loss);
    result.epochs_run = epoch + 1;

    if (val_loss < best_val) {
      best_val = val_loss;
      result.best_net = current;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best > options.patience) break;
    }
  }
  return result;
}

}  // namespace qflrl::nn
