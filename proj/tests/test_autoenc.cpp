#include <cmath>

#include "doctest.h"
#include "qflrl/autoenc.hpp"
#include "test_helpers.hpp"

using namespace qflrl;
using namespace qflrl::autoenc;

namespace {

// data with a prescribed spectrum: x = V sqrt(diag(lambda)) g
struct SpectrumData {
  Tensor data;
  Tensor basis;  // orthogonal columns
};

SpectrumData make_spectrum_data(const std::vector<double>& lambdas, std::size_t batch,
                                std::uint64_t seed) {
  const std::size_t dim = lambdas.size();
  RngStream rng(seed);
  Tensor raw({dim, dim});
  for (double& v : raw.values()) v = rng.gaussian(0.0, 1.0);
  // orthogonalize via the helper exposed through largest_principal_angle_deg's
  // machinery: redo Gram-Schmidt locally
  Tensor q = raw;
  for (std::size_t col = 0; col < dim; ++col) {
    for (std::size_t prev = 0; prev < col; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += q.at(i, col) * q.at(i, prev);
      for (std::size_t i = 0; i < dim; ++i) q.at(i, col) -= dot * q.at(i, prev);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm += q.at(i, col) * q.at(i, col);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < dim; ++i) q.at(i, col) /= norm;
  }
  SpectrumData out{Tensor({batch, dim}), q};
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t j = 0; j < dim; ++j) {
      const double g = rng.gaussian(0.0, std::sqrt(lambdas[j]));
      for (std::size_t i = 0; i < dim; ++i) out.data.at(s, i) += q.at(i, j) * g;
    }
  // center exactly
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t s = 0; s < batch; ++s) mean += out.data.at(s, j);
    mean /= static_cast<double>(batch);
    for (std::size_t s = 0; s < batch; ++s) out.data.at(s, j) -= mean;
  }
  return out;
}

}  // namespace

TEST_CASE("correlation_matrix on +/- e1 data") {
  Tensor data({2, 3}, {1, 0, 0, -1, 0, 0});
  CorrelationMatrix c = correlation_matrix(data);
  CHECK_FALSE(c.centered_by_op);
  CHECK(c.rho.at(0, 0) == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != 0 || j != 0) CHECK(c.rho.at(i, j) == 0.0);
}

TEST_CASE("correlation_matrix is exactly symmetric and centers when needed") {
  RngStream rng(21);
  Tensor data({500, 4});
  for (double& v : data.values()) v = rng.gaussian(1.0, 1.0);  // mean far from 0
  CorrelationMatrix c = correlation_matrix(data);
  CHECK(c.centered_by_op);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(c.rho.at(i, j) == c.rho.at(j, i));
}

TEST_CASE("correlation_matrix of isotropic data is close to identity") {
  RngStream rng(22);
  const std::size_t n = 100000;
  Tensor data({n, 3});
  for (double& v : data.values()) v = rng.gaussian(0.0, 1.0);
  CorrelationMatrix c = correlation_matrix(data);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::fabs(c.rho.at(i, j) - (i == j ? 1.0 : 0.0)) < 0.05);
}

TEST_CASE("correlation_matrix rejects tiny batches") {
  CHECK_THROWS_AS(correlation_matrix(Tensor({1, 3})), InvalidInput);
}

TEST_CASE("pca_optimal_cost arithmetic") {
  PCAResult r;
  r.eigenvalues = {3.0, 2.0, 1.0};
  r.eigenvectors = Tensor({3, 3});
  r.m_hidden = 1;
  CHECK(pca_optimal_cost(r) == doctest::Approx(3.0));
  r.m_hidden = 3;
  CHECK(pca_optimal_cost(r) == 0.0);
  r.m_hidden = 0;
  CHECK(pca_optimal_cost(r) == doctest::Approx(6.0));
  r.m_hidden = 4;
  CHECK_THROWS_AS(pca_optimal_cost(r), InvalidInput);

  // non-increasing in the subspace size
  double prev = 1e300;
  for (std::size_t m = 0; m <= 3; ++m) {
    r.m_hidden = m;
    const double c = pca_optimal_cost(r);
    CHECK(c <= prev);
    prev = c;
  }
}

TEST_CASE("linear autoencoder reaches the PCA optimum") {
  const std::vector<double> lambdas{5.0, 3.0, 1.0, 0.5, 0.25, 0.1};
  SpectrumData sd = make_spectrum_data(lambdas, 2048, 31);
  CorrelationMatrix corr = correlation_matrix(sd.data);
  PCAResult p = pca(corr, 2);
  const double optimum = pca_optimal_cost(p);

  RngStream rng(32);
  LinearAutoencoderResult r =
      train_linear_autoencoder(sd.data, 2, nn::Optimizer::adam(0.02), 1500, rng);

  CHECK(r.final_cost <= optimum * 1.02);
  CHECK(r.final_cost >= optimum - 1e-8);  // the PCA optimum is a true lower bound

  // decoder-encoder product has numerical rank <= m_hidden
  const Tensor product = matmul(r.net.weights()[1], r.net.weights()[0]);
  const std::vector<double> sv = singular_values(product);
  for (std::size_t k = 2; k < sv.size(); ++k) CHECK(sv[k] < 1e-6);

  // decoder span aligns with the top eigenspace (eigen-gap is ample here)
  Tensor top({6, 2});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) top.at(i, j) = p.eigenvectors.at(i, j);
  CHECK(largest_principal_angle_deg(r.net.weights()[1], top) < 5.0);
}

TEST_CASE("decorrelation_penalty") {
  RngStream rng(41);

  Tensor single({100, 1});
  for (double& v : single.values()) v = rng.gaussian(0.0, 1.0);
  CHECK(decorrelation_penalty(single) == 0.0);

  // perfectly correlated pair: penalty = 2 <y1^2>^2
  const std::size_t n = 200;
  Tensor pair({n, 2});
  double second_moment = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double y = rng.gaussian(0.0, 1.0);
    pair.at(s, 0) = y;
    pair.at(s, 1) = y;
    second_moment += y * y;
  }
  second_moment /= static_cast<double>(n);
  CHECK(decorrelation_penalty(pair) ==
        doctest::Approx(2.0 * second_moment * second_moment).epsilon(1e-9));
  CHECK(decorrelation_penalty(pair) > 0.0);

  // independent latents: small penalty at 1e5 samples
  Tensor indep({100000, 2});
  for (double& v : indep.values()) v = rng.gaussian(0.0, 1.0);
  CHECK(decorrelation_penalty(indep) < 1e-2);
  CHECK(decorrelation_penalty(indep) >= 0.0);
}

TEST_CASE("denoising autoencoder beats the output=input baseline") {
  DenoiseConfig config;
  config.image_size = 12;
  config.steps = 300;
  config.batch_size = 16;
  config.noise_amp = 0.3;
  config.test_images = 96;
  config.seed = 7;
  DenoiseResult r = denoising_task(config);
  CHECK(r.test_error < r.noise_baseline);
  // fresh data every batch: train and test errors agree
  CHECK(std::fabs(r.train_error - r.test_error) / r.test_error < 0.2);
}

TEST_CASE("denoising task with zero noise reduces to clean autoencoding") {
  DenoiseConfig config;
  config.image_size = 12;
  config.steps = 150;
  config.batch_size = 16;
  config.noise_amp = 0.0;
  config.test_images = 64;
  config.seed = 8;
  DenoiseResult r = denoising_task(config);
  CHECK(r.noise_baseline == 0.0);
  CHECK(r.test_error == doctest::Approx(r.clean_recon_error));
}
