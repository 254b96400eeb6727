#include "qflrl/autoenc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "qflrl/complex_matrix.hpp"

namespace qflrl::autoenc {

CorrelationMatrix correlation_matrix(const Tensor& data) {
  if (data.rank() != 2) throw InvalidInput("correlation_matrix: expects [batch, dim]");
  const std::size_t batch = data.extent(0), dim = data.extent(1);
  if (batch < 2) throw InvalidInput("correlation_matrix: batch must contain at least 2 samples");

  std::vector<double> mean(dim, 0.0);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += data.at(s, j);
  for (double& m : mean) m /= static_cast<double>(batch);
  bool needs_centering = false;
  for (double m : mean) needs_centering = needs_centering || std::fabs(m) > 1e-8;

  CorrelationMatrix out;
  out.centered_by_op = needs_centering;
  out.rho = Tensor({dim, dim});
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t l = 0; l < dim; ++l) {
      const double xl = data.at(s, l) - (needs_centering ? mean[l] : 0.0);
      for (std::size_t j = l; j < dim; ++j) {
        const double xj = data.at(s, j) - (needs_centering ? mean[j] : 0.0);
        out.rho.at(l, j) += xl * xj;
      }
    }
  for (std::size_t l = 0; l < dim; ++l)
    for (std::size_t j = l; j < dim; ++j) {
      out.rho.at(l, j) /= static_cast<double>(batch);
      out.rho.at(j, l) = out.rho.at(l, j);  // symmetric by construction
    }
  return out;
}

PCAResult pca(const CorrelationMatrix& corr, std::size_t m_hidden) {
  const std::size_t dim = corr.rho.extent(0);
  if (m_hidden > dim) throw InvalidInput("pca: subspace size exceeds dimension");
  ComplexMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) m.at(i, j) = corr.rho.at(i, j);
  EigResult eig = hermitian_eig(m, 1e-9);
  PCAResult out;
  out.eigenvalues = eig.values;
  out.eigenvectors = Tensor({dim, dim});
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) out.eigenvectors.at(i, j) = eig.vectors.at(i, j).real();
  out.m_hidden = m_hidden;
  return out;
}

double pca_optimal_cost(const PCAResult& result) {
  if (result.m_hidden > result.eigenvalues.size())
    throw InvalidInput("pca_optimal_cost: subspace size exceeds dimension");
  double cost = 0.0;
  for (std::size_t j = result.m_hidden; j < result.eigenvalues.size(); ++j)
    cost += result.eigenvalues[j];
  return cost;
}

LinearAutoencoderResult train_linear_autoencoder(const Tensor& data, std::size_t m_hidden,
                                                 nn::Optimizer opt, std::size_t steps,
                                                 RngStream& rng) {
  if (data.rank() != 2) throw InvalidInput("train_linear_autoencoder: expects [batch, dim]");
  const std::size_t dim = data.extent(1);
  LinearAutoencoderResult out;
  out.net = nn::Network::create(
      {dim},
      {nn::LayerSpec::dense(dim, m_hidden, nn::Activation::Linear),
       nn::LayerSpec::dense(m_hidden, dim, nn::Activation::Linear)},
      rng);
  for (std::size_t step = 0; step < steps; ++step) {
    const double cost = nn::train_on_batch(out.net, data, data, nn::Loss::Quadratic, opt);
    if (!std::isfinite(cost))
      throw NumericalError("train_linear_autoencoder: cost diverged at step " +
                           std::to_string(step));
    out.cost_curve.push_back(cost);
  }
  out.final_cost = nn::loss_eval(nn::forward(out.net, data).output(), data, nn::Loss::Quadratic);
  return out;
}

double decorrelation_penalty(const Tensor& latents) {
  if (latents.rank() != 2) throw InvalidInput("decorrelation_penalty: expects [batch, m]");
  const std::size_t batch = latents.extent(0), m = latents.extent(1);
  if (batch < 2) throw InvalidInput("decorrelation_penalty: batch must contain at least 2 samples");
  double penalty = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      if (j == k) continue;
      double moment = 0.0;
      for (std::size_t s = 0; s < batch; ++s) moment += latents.at(s, j) * latents.at(s, k);
      moment /= static_cast<double>(batch);
      penalty += moment * moment;
    }
  return penalty;
}

namespace {

// Gram-Schmidt with a second orthogonalization pass; columns assumed independent.
Tensor orthonormal_columns(const Tensor& a) {
  const std::size_t dim = a.extent(0), k = a.extent(1);
  Tensor q = a;
  for (std::size_t col = 0; col < k; ++col) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t prev = 0; prev < col; ++prev) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += q.at(i, col) * q.at(i, prev);
        for (std::size_t i = 0; i < dim; ++i) q.at(i, col) -= dot * q.at(i, prev);
      }
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm += q.at(i, col) * q.at(i, col);
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw InvalidInput("principal angle: columns are not independent");
    for (std::size_t i = 0; i < dim; ++i) q.at(i, col) /= norm;
  }
  return q;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i)
    for (std::size_t j = 0; j < a.extent(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace

std::vector<double> singular_values(const Tensor& m) {
  // eigenvalues of m^T m are the squared singular values
  const Tensor mtm = matmul(transpose(m), m);
  const std::size_t n = mtm.extent(0);
  ComplexMatrix h(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      h.at(i, j) = 0.5 * (mtm.at(i, j) + mtm.at(j, i));  // symmetrize rounding noise
  EigResult eig = hermitian_eig(h, 1e-9);
  std::vector<double> sv;
  sv.reserve(n);
  for (double v : eig.values) sv.push_back(std::sqrt(std::max(v, 0.0)));
  return sv;
}

double largest_principal_angle_deg(const Tensor& a, const Tensor& b) {
  if (a.extent(0) != b.extent(0) || a.extent(1) != b.extent(1))
    throw InvalidInput("principal angle: shapes must agree");
  const Tensor qa = orthonormal_columns(a), qb = orthonormal_columns(b);
  const std::vector<double> sv = singular_values(matmul(transpose(qa), qb));
  const double smallest = std::clamp(sv.back(), -1.0, 1.0);
  return std::acos(smallest) * 180.0 / 3.14159265358979323846;
}

void make_circle_pair(const DenoiseConfig& config, RngStream& rng, std::span<double> clean,
                      std::span<double> noisy) {
  const std::size_t s = config.image_size;
  const double r = config.radius_min + (config.radius_max - config.radius_min) * rng.uniform01();
  const double cx = rng.uniform01() * static_cast<double>(s - 1);
  const double cy = rng.uniform01() * static_cast<double>(s - 1);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      clean[y * s + x] = dx * dx + dy * dy <= r * r ? 1.0 : 0.0;
    }
  for (std::size_t i = 0; i < s * s; ++i) {
    double v = clean[i];
    if (config.noise_amp > 0.0) v += rng.gaussian(0.0, config.noise_amp);
    noisy[i] = std::clamp(v, 0.0, 1.0);
  }
}

namespace {

void fill_batch(const DenoiseConfig& config, RngStream& rng, Tensor& noisy, Tensor& clean) {
  const std::size_t px = config.image_size * config.image_size;
  for (std::size_t b = 0; b < noisy.extent(0); ++b)
    make_circle_pair(config, rng, {clean.data() + b * px, px}, {noisy.data() + b * px, px});
}

}  // namespace

DenoiseResult denoising_task(const DenoiseConfig& config) {
  const std::size_t s = config.image_size;
  RngStream init_rng(config.seed, 0), data_rng(config.seed, 1);
  DenoiseResult out;
  out.net = nn::Network::create(
      {1, s, s},
      {nn::LayerSpec::conv2d(1, 6, 2, nn::Activation::Relu),
       nn::LayerSpec::conv2d(6, 3, 1, nn::Activation::Relu),
       nn::LayerSpec::conv2d(3, 6, 1, nn::Activation::Relu),
       nn::LayerSpec::conv2d(6, 1, 2, nn::Activation::Linear)},
      init_rng);
  nn::Optimizer opt = nn::Optimizer::adam(config.learning_rate);

  Tensor noisy({config.batch_size, 1, s, s}), clean({config.batch_size, 1, s, s});
  const std::size_t px = s * s;
  double tail_sum = 0.0;
  std::size_t tail_count = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    fill_batch(config, data_rng, noisy, clean);
    const double cost = nn::train_on_batch(out.net, noisy, clean, nn::Loss::Quadratic, opt);
    out.cost_curve.push_back(cost / static_cast<double>(px));  // per-pixel error
    if (step * 4 >= config.steps * 3) {
      tail_sum += out.cost_curve.back();
      ++tail_count;
    }
  }
  out.train_error = tail_sum / static_cast<double>(std::max<std::size_t>(tail_count, 1));

  // held-out evaluation on fresh images
  Tensor test_noisy({config.test_images, 1, s, s}), test_clean({config.test_images, 1, s, s});
  fill_batch(config, data_rng, test_noisy, test_clean);
  const Tensor recon = nn::forward(out.net, test_noisy).output();
  const Tensor recon_clean = nn::forward(out.net, test_clean).output();
  double err = 0.0, err_clean = 0.0, baseline = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    err += (recon[i] - test_clean[i]) * (recon[i] - test_clean[i]);
    err_clean += (recon_clean[i] - test_clean[i]) * (recon_clean[i] - test_clean[i]);
    baseline += (test_noisy[i] - test_clean[i]) * (test_noisy[i] - test_clean[i]);
  }
  const double denom = static_cast<double>(recon.size());
  out.test_error = err / denom;
  out.clean_recon_error = err_clean / denom;
  out.noise_baseline = baseline / denom;

  if (!config.dump_dir.empty()) {
    for (std::size_t k = 0; k < std::min<std::size_t>(4, config.test_images); ++k) {
      const std::string stem = config.dump_dir + "/denoise_" + std::to_string(k);
      write_pgm(stem + "_noisy.pgm", test_noisy.data() + k * px, s, s);
      write_pgm(stem + "_recon.pgm", recon.data() + k * px, s, s);
      write_pgm(stem + "_clean.pgm", test_clean.data() + k * px, s, s);
    }
  }
  return out;
}

void write_pgm(const std::string& path, const double* pixels, std::size_t h, std::size_t w) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open PGM file for writing: " + path);
  f << "P2\n" << w << " " << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const int v = static_cast<int>(std::lround(std::clamp(pixels[y * w + x], 0.0, 1.0) * 255.0));
      f << v << (x + 1 == w ? "" : " ");
    }
    f << "\n";
  }
}

}  // namespace qflrl::autoenc
