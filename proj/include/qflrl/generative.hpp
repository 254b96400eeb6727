#pragma once

#include <cstdint>
#include <vector>

#include "qflrl/complex_matrix.hpp"
#include "qflrl/rng.hpp"
#include "qflrl/tensor.hpp"

namespace qflrl::generative {

// --- restricted Boltzmann machine, binary units ---

struct RBMParams {
  Tensor visible_bias;  // [n_v]
  Tensor hidden_bias;   // [n_h]
  Tensor coupling;      // [n_v, n_h]

  RBMParams(std::size_t n_v, std::size_t n_h)
      : visible_bias({n_v}), hidden_bias({n_h}), coupling({n_v, n_h}) {}
  std::size_t n_visible() const { return visible_bias.size(); }
  std::size_t n_hidden() const { return hidden_bias.size(); }
};

/// E(v,h) = -sum a_i v_i - sum b_j h_j - sum v_i w_ij h_j; units are 0/1.
double rbm_energy(const RBMParams& params, std::span<const int> v, std::span<const int> h);

/// p(h_j = 1 | v) = sigmoid(b_j + sum_i v_i w_ij), independent per unit.
std::vector<double> cond_prob_h(const RBMParams& params, std::span<const int> v);
std::vector<double> cond_prob_v(const RBMParams& params, std::span<const int> h);

/// Alternating Gibbs chain v -> h -> v' -> ...; states encoded as bit
/// patterns (unit i in bit i). Returns `steps` visible and hidden samples.
struct GibbsChain {
  std::vector<std::uint32_t> visible;
  std::vector<std::uint32_t> hidden;
};
GibbsChain gibbs_chain(const RBMParams& params, std::span<const int> v0, std::size_t steps,
                       RngStream& rng);

struct RBMDelta {
  Tensor visible_bias;
  Tensor hidden_bias;
  Tensor coupling;
};

/// One-step contrastive-divergence statistics for a binary batch
/// [n_samples, n_v]: per-sample v -> h -> v' -> (hidden probabilities), with
/// hidden-side probabilities in place of samples where the expectation
/// allows. The returned delta is the pre-learning-rate mean update.
RBMDelta cd1_statistics(const RBMParams& params, const Tensor& batch, RngStream& rng);

/// Applies lr * cd1_statistics to the parameters.
void cd1_update(RBMParams& params, const Tensor& batch, double lr, RngStream& rng);

/// Exact marginal P(v) over all 2^{n_v} visible configurations by summing
/// e^{-E} over hidden configurations; feasible for n_v + n_h <= 20.
std::vector<double> exact_distribution(const RBMParams& params);

/// C = -sum_v P0(v) ln P(v) with the exact marginal.
double rbm_cross_entropy(const std::vector<double>& p0, const RBMParams& params);

/// KL(P0 || P) = cross entropy minus the entropy of P0.
double rbm_kl_divergence(const std::vector<double>& p0, const RBMParams& params);

struct RBMTrainConfig {
  std::size_t steps = 4000;
  std::size_t batch_size = 64;
  double learning_rate = 0.1;
  std::size_t log_every = 100;
  std::uint64_t seed = 1;
};

struct RBMTrainPoint {
  std::size_t step = 0;
  double cross_entropy = 0.0;
  double kl = 0.0;
};

/// CD-1 training against a target distribution given as an explicit table
/// over the 2^{n_v} visible states; batches are sampled from the table.
std::vector<RBMTrainPoint> train_rbm_cd1(RBMParams& params, const std::vector<double>& p0,
                                         const RBMTrainConfig& config);

// --- quantum Boltzmann machine at desk scale ---

struct QBMModel {
  std::vector<ComplexMatrix> basis;  // Hermitian operators H_j, shared dim <= 16
  std::vector<double> weights;       // w_j

  void validate() const;
  std::size_t dim() const { return basis.empty() ? 0 : basis[0].dim(); }
};

/// Thermal state sigma = e^{-sum_j w_j H_j} / tr[...] via the Hermitian
/// eigensolver; Hermitian, unit trace, strictly positive.
ComplexMatrix qbm_state(const QBMModel& model);

/// d/dw_j S(rho || sigma) = tr[rho H_j] - tr[sigma H_j], exact for
/// non-commuting bases because ln sigma is linear in the weights.
std::vector<double> qbm_gradient(const QBMModel& model, const ComplexMatrix& rho);

/// S(rho || sigma) = tr[rho ln rho] - tr[rho ln sigma]; 0 ln 0 := 0 on rho's
/// null directions; sigma must be full rank (thermal states are).
double relative_entropy(const ComplexMatrix& rho, const ComplexMatrix& sigma);

struct QBMTrainPoint {
  std::size_t step = 0;
  double relative_entropy = 0.0;
};

std::vector<QBMTrainPoint> train_qbm(QBMModel& model, const ComplexMatrix& target, double eta,
                                     std::size_t steps, std::size_t log_every = 50);

// Pauli matrices and the standard two-qubit operator basis used by the
// tests and the experiment runner.
ComplexMatrix pauli_x();
ComplexMatrix pauli_z();
std::vector<ComplexMatrix> two_qubit_basis();  // Z1, Z2, X1, X2, ZZ, XX

}  // namespace qflrl::generative
