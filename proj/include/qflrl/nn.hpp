#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qflrl/rng.hpp"
#include "qflrl/tensor.hpp"

namespace qflrl::nn {

enum class Activation { Sigmoid, Relu, Linear, Softmax };
enum class Loss { Quadratic, CategoricalCrossEntropy };
enum class Padding { Zero, Periodic };

const char* to_string(Activation a);
const char* to_string(Loss l);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  enum class Kind { Dense, Conv1d, Conv2d, AvgPool, Flatten };
  Kind kind = Kind::Dense;
  Activation activation = Activation::Linear;
  std::size_t n_in = 0, n_out = 0;                       // dense
  std::size_t channels_in = 0, channels_out = 0;         // conv
  std::size_t half_width = 0;                            // conv kernel extent is 2d+1
  Padding padding = Padding::Zero;                       // conv boundary handling
  std::size_t block = 0;                                 // pooling block edge
  double dropout_rate = 0.0;                             // 0 disables the mask

  static LayerSpec dense(std::size_t n_in, std::size_t n_out, Activation act);
  static LayerSpec conv1d(std::size_t c_in, std::size_t c_out, std::size_t half_width,
                          Activation act, Padding pad = Padding::Zero);
  static LayerSpec conv2d(std::size_t c_in, std::size_t c_out, std::size_t half_width,
                          Activation act, Padding pad = Padding::Zero);
  static LayerSpec avg_pool(std::size_t block);
  static LayerSpec flatten();

  bool has_params() const { return kind == Kind::Dense || kind == Kind::Conv1d || kind == Kind::Conv2d; }
};

/// Feedforward network: ordered layers plus their weight and bias tensors.
/// The parameter vector theta is the concatenation of all weights and biases.
class Network {
 public:
  Network() = default;

  /// Validates layer-to-layer shape compatibility and initializes weights
  /// with Gaussian entries of std 1/sqrt(fan_in); biases start at zero.
  static Network create(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers,
                        RngStream& rng);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  const std::vector<std::size_t>& output_shape() const { return shapes_.back(); }
  const std::vector<std::size_t>& layer_output_shape(std::size_t i) const { return shapes_[i + 1]; }

  std::vector<Tensor>& weights() { return weights_; }
  const std::vector<Tensor>& weights() const { return weights_; }
  std::vector<Tensor>& biases() { return biases_; }
  const std::vector<Tensor>& biases() const { return biases_; }

  std::size_t param_count() const;

  /// Flat copy of theta (all weights then all biases, layer by layer).
  std::vector<double> flatten_params() const;
  void unflatten_params(const std::vector<double>& theta);

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  std::vector<std::vector<std::size_t>> shapes_;  // shapes_[0] = input, shapes_[i+1] = layer i output
};

/// Everything the backward pass reuses from the forward pass: y[0] is the
/// input batch, y[n+1] and z[n] belong to layer n. Dropout masks are kept
/// when a layer uses them during training.
struct ForwardTrace {
  std::vector<Tensor> y;
  std::vector<Tensor> z;
  std::vector<Tensor> dropout_masks;
  const Tensor& output() const { return y.back(); }
};

struct Gradients {
  std::vector<Tensor> w;
  std::vector<Tensor> b;
  double squared_norm() const;
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
};

Gradients zeros_like_params(const Network& net);

/// Forward evaluation for a batch x of shape [batch, input_shape...].
/// When `train_rng` is given, per-layer dropout masks (if configured) are
/// sampled with inverted scaling.
ForwardTrace forward(const Network& net, const Tensor& x, RngStream* train_rng = nullptr);

double loss_eval(const Tensor& output, const Tensor& target, Loss loss);
/// Total number of times cross-entropy clamped an output below 1e-12.
std::uint64_t loss_clamp_warnings();

/// Exact gradient of the batch-mean loss with respect to every parameter,
/// by layerwise reverse accumulation. The softmax/cross-entropy pair is
/// fused; softmax with the quadratic loss is rejected.
Gradients backprop(const Network& net, const ForwardTrace& trace, const Tensor& target, Loss loss);

/// General form: per-sample weights replace the implicit 1/batch factor.
Gradients backprop_weighted(const Network& net, const ForwardTrace& trace, const Tensor& target,
                            Loss loss, std::span<const double> sample_weights);

struct Optimizer {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Sgd;
  double lr = 0.01;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Tensor> m_w, v_w, m_b, v_b;  // Adam moments, shaped like theta

  static Optimizer sgd(double lr);
  static Optimizer adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8);
};

/// Applies one descent step in place. Non-finite gradient entries abort the
/// step, naming the offending layer.
void optimizer_step(Optimizer& opt, Network& net, const Gradients& grads);

/// One forward + backprop + optimizer step; returns the pre-update loss.
double train_on_batch(Network& net, const Tensor& x, const Tensor& target, Loss loss,
                      Optimizer& opt, RngStream* dropout_rng = nullptr);

struct FitOptions {
  double split_fraction = 0.2;
  std::size_t patience = 5;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 32;
  Loss loss = Loss::Quadratic;
};

struct FitResult {
  Network best_net;
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Holds out the trailing `split_fraction` of the data as a validation set,
/// trains in mini-batches, and stops once `patience` consecutive epochs
/// bring no validation improvement. Returns the best checkpoint.
FitResult fit_with_validation(const Network& net, const Tensor& x, const Tensor& y,
                              const FitOptions& options, Optimizer opt);

// --- checkpoint io (shared JSON format) ---

std::string network_to_json(const Network& net, const Optimizer* opt = nullptr);
struct LoadedCheckpoint {
  Network net;
  std::optional<Optimizer> opt;
};
LoadedCheckpoint network_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Network& net, const Optimizer* opt = nullptr);
LoadedCheckpoint load_checkpoint(const std::string& path);

// --- numerical differentiation (forward passes only; no backprop involved) ---

/// Central finite differences of the batch-mean loss wrt every parameter.
Gradients finite_diff_gradient(Network net, const Tensor& x, const Tensor& target, Loss loss,
                               double h = 1e-5);

/// max over coordinates of |g_a - g_n| / max(1, |g_a|, |g_n|)
double gradient_check_error(const Network& net, const Tensor& x, const Tensor& target, Loss loss,
                            double h = 1e-5);

struct GradCheckCase {
  std::string description;
  std::size_t param_count = 0;
  double max_rel_error = 0.0;
};

/// Backprop vs finite differences over `n_cases` randomly drawn
/// architectures covering all layer kinds, activations and loss pairings.
std::vector<GradCheckCase> gradient_check_suite(std::uint64_t seed, std::size_t n_cases = 20);

}  // namespace qflrl::nn
