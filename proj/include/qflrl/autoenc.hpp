#pragma once

#include <string>
#include <vector>

#include "qflrl/nn.hpp"
#include "qflrl/tensor.hpp"

namespace qflrl::autoenc {

struct CorrelationMatrix {
  Tensor rho;              // [dim, dim], symmetric
  bool centered_by_op = false;  // set when the op had to subtract a nonzero mean itself
};

/// rho = batch average of outer products x x^T. The caller is expected to
/// center the data; if a per-coordinate mean exceeds 1e-8 the op centers
/// the batch itself and records that it did.
CorrelationMatrix correlation_matrix(const Tensor& data);

struct PCAResult {
  std::vector<double> eigenvalues;  // descending
  Tensor eigenvectors;              // [dim, dim], orthonormal columns
  std::size_t m_hidden = 0;
};

PCAResult pca(const CorrelationMatrix& corr, std::size_t m_hidden);

/// Residual reconstruction cost of the optimal rank-m projector: the sum of
/// the eigenvalues beyond the kept subspace.
double pca_optimal_cost(const PCAResult& result);

struct LinearAutoencoderResult {
  nn::Network net;  // dense(dim -> m, linear) . dense(m -> dim, linear)
  double final_cost = 0.0;
  std::vector<double> cost_curve;
};

LinearAutoencoderResult train_linear_autoencoder(const Tensor& data, std::size_t m_hidden,
                                                 nn::Optimizer opt, std::size_t steps,
                                                 RngStream& rng);

/// Sum of squared off-diagonal second moments of the latent batch.
double decorrelation_penalty(const Tensor& latents);

// --- helpers for subspace comparison and rank checks ---

/// Largest principal angle (degrees) between the column spans of a and b
/// (both [dim, k] with independent columns).
double largest_principal_angle_deg(const Tensor& a, const Tensor& b);

/// Descending singular values of a general matrix [m, n].
std::vector<double> singular_values(const Tensor& m);

// --- denoising exercise ---

struct DenoiseConfig {
  std::size_t image_size = 16;
  double radius_min = 2.0;
  double radius_max = 5.0;
  double noise_amp = 0.3;
  std::size_t steps = 400;
  std::size_t batch_size = 16;
  double learning_rate = 3e-3;
  std::size_t test_images = 128;
  std::uint64_t seed = 1;
  std::string dump_dir;  // when set, PGM before/after images are written here
};

struct DenoiseResult {
  nn::Network net;
  double train_error = 0.0;        // mean over the final quarter of training batches
  double test_error = 0.0;         // fresh noisy images vs clean targets
  double clean_recon_error = 0.0;  // feeding clean images through the same net
  double noise_baseline = 0.0;     // mean |noisy - clean|^2 per pixel (output = input)
  std::vector<double> cost_curve;
};

/// Clean images show one randomly placed circle; input is the clean image
/// plus clipped Gaussian noise, target is the clean image. Every batch is
/// generated fresh.
DenoiseResult denoising_task(const DenoiseConfig& config);

/// Clean/noisy pair generator used by the denoising task (exposed for tests).
void make_circle_pair(const DenoiseConfig& config, RngStream& rng, std::span<double> clean,
                      std::span<double> noisy);

void write_pgm(const std::string& path, const double* pixels, std::size_t h, std::size_t w);

}  // namespace qflrl::autoenc
