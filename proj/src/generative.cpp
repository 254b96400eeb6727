#include "qflrl/generative.hpp"

#include <algorithm>
#include <cmath>

namespace qflrl::generative {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_binary(std::span<const int> units, const char* what) {
  for (int u : units)
    if (u != 0 && u != 1) throw InvalidInput(std::string(what) + ": units must be 0 or 1");
}

}  // namespace

double rbm_energy(const RBMParams& params, std::span<const int> v, std::span<const int> h) {
  if (v.size() != params.n_visible() || h.size() != params.n_hidden())
    throw InvalidInput("rbm_energy: configuration length mismatch");
  check_binary(v, "rbm_energy");
  check_binary(h, "rbm_energy");
  double e = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) e -= params.visible_bias[i] * v[i];
  for (std::size_t j = 0; j < h.size(); ++j) e -= params.hidden_bias[j] * h[j];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 0) continue;
    for (std::size_t j = 0; j < h.size(); ++j)
      e -= params.coupling.at(i, j) * h[j];
  }
  return e;
}

std::vector<double> cond_prob_h(const RBMParams& params, std::span<const int> v) {
  if (v.size() != params.n_visible()) throw InvalidInput("cond_prob_h: length mismatch");
  check_binary(v, "cond_prob_h");
  std::vector<double> p(params.n_hidden());
  for (std::size_t j = 0; j < p.size(); ++j) {
    double z = params.hidden_bias[j];
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i]) z += params.coupling.at(i, j);
    p[j] = sigmoid(z);
  }
  return p;
}

std::vector<double> cond_prob_v(const RBMParams& params, std::span<const int> h) {
  if (h.size() != params.n_hidden()) throw InvalidInput("cond_prob_v: length mismatch");
  check_binary(h, "cond_prob_v");
  std::vector<double> p(params.n_visible());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double z = params.visible_bias[i];
    for (std::size_t j = 0; j < h.size(); ++j)
      if (h[j]) z += params.coupling.at(i, j);
    p[i] = sigmoid(z);
  }
  return p;
}

GibbsChain gibbs_chain(const RBMParams& params, std::span<const int> v0, std::size_t steps,
                       RngStream& rng) {
  check_binary(v0, "gibbs_chain");
  if (v0.size() != params.n_visible()) throw InvalidInput("gibbs_chain: length mismatch");
  GibbsChain chain;
  chain.visible.reserve(steps);
  chain.hidden.reserve(steps);
  std::vector<int> v(v0.begin(), v0.end()), h(params.n_hidden());
  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<double> ph = cond_prob_h(params, v);
    std::uint32_t h_bits = 0;
    for (std::size_t j = 0; j < h.size(); ++j) {
      h[j] = rng.bernoulli(ph[j]);
      h_bits |= static_cast<std::uint32_t>(h[j]) << j;
    }
    const std::vector<double> pv = cond_prob_v(params, h);
    std::uint32_t v_bits = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = rng.bernoulli(pv[i]);
      v_bits |= static_cast<std::uint32_t>(v[i]) << i;
    }
    chain.hidden.push_back(h_bits);
    chain.visible.push_back(v_bits);
  }
  return chain;
}

RBMDelta cd1_statistics(const RBMParams& params, const Tensor& batch, RngStream& rng) {
  if (batch.rank() != 2 || batch.extent(1) != params.n_visible())
    throw InvalidInput("cd1_statistics: batch must be [n, n_visible]");
  const std::size_t n = batch.extent(0), nv = params.n_visible(), nh = params.n_hidden();
  if (n == 0) throw InvalidInput("cd1_statistics: empty batch");

  RBMDelta delta{Tensor({nv}), Tensor({nh}), Tensor({nv, nh})};
  std::vector<int> v(nv), h(nh), v_prime(nv);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < nv; ++i) {
      const double x = batch.at(s, i);
      if (x != 0.0 && x != 1.0) throw InvalidInput("cd1_statistics: batch entries must be binary");
      v[i] = static_cast<int>(x);
    }
    // data side: hidden probabilities instead of samples
    const std::vector<double> ph = cond_prob_h(params, v);
    for (std::size_t j = 0; j < nh; ++j) h[j] = rng.bernoulli(ph[j]);
    // reconstruction: sampled binary visibles, then hidden probabilities
    const std::vector<double> pv = cond_prob_v(params, h);
    for (std::size_t i = 0; i < nv; ++i) v_prime[i] = rng.bernoulli(pv[i]);
    const std::vector<double> ph_prime = cond_prob_h(params, v_prime);

    for (std::size_t i = 0; i < nv; ++i)
      delta.visible_bias[i] += static_cast<double>(v[i] - v_prime[i]);
    for (std::size_t j = 0; j < nh; ++j) delta.hidden_bias[j] += ph[j] - ph_prime[j];
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t j = 0; j < nh; ++j)
        delta.coupling.at(i, j) += v[i] * ph[j] - v_prime[i] * ph_prime[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  delta.visible_bias *= inv_n;
  delta.hidden_bias *= inv_n;
  delta.coupling *= inv_n;
  return delta;
}

void cd1_update(RBMParams& params, const Tensor& batch, double lr, RngStream& rng) {
  const RBMDelta delta = cd1_statistics(params, batch, rng);
  for (std::size_t i = 0; i < params.n_visible(); ++i)
    params.visible_bias[i] += lr * delta.visible_bias[i];
  for (std::size_t j = 0; j < params.n_hidden(); ++j)
    params.hidden_bias[j] += lr * delta.hidden_bias[j];
  for (std::size_t i = 0; i < params.coupling.size(); ++i)
    params.coupling[i] += lr * delta.coupling[i];
}

std::vector<double> exact_distribution(const RBMParams& params) {
  const std::size_t nv = params.n_visible(), nh = params.n_hidden();
  if (nv + nh > 20) throw InvalidInput("exact_distribution: more than 20 units");
  std::vector<double> weight(std::size_t{1} << nv, 0.0);
  std::vector<int> v(nv), h(nh);
  for (std::uint32_t vb = 0; vb < (1u << nv); ++vb) {
    for (std::size_t i = 0; i < nv; ++i) v[i] = (vb >> i) & 1;
    double acc = 0.0;
    for (std::uint32_t hb = 0; hb < (1u << nh); ++hb) {
      for (std::size_t j = 0; j < nh; ++j) h[j] = (hb >> j) & 1;
      acc += std::exp(-rbm_energy(params, v, h));
    }
    weight[vb] = acc;
  }
  double z = 0.0;
  for (double w : weight) z += w;
  for (double& w : weight) w /= z;
  return weight;
}

double rbm_cross_entropy(const std::vector<double>& p0, const RBMParams& params) {
  const std::vector<double> p = exact_distribution(params);
  if (p0.size() != p.size())
    throw InvalidInput("rbm_cross_entropy: target table size mismatch");
  double c = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p0[v] == 0.0) continue;
    c -= p0[v] * std::log(std::max(p[v], 1e-300));
  }
  return c;
}

double rbm_kl_divergence(const std::vector<double>& p0, const RBMParams& params) {
  double entropy = 0.0;
  for (double q : p0)
    if (q > 0.0) entropy -= q * std::log(q);
  return rbm_cross_entropy(p0, params) - entropy;
}

std::vector<RBMTrainPoint> train_rbm_cd1(RBMParams& params, const std::vector<double>& p0,
                                         const RBMTrainConfig& config) {
  const std::size_t nv = params.n_visible();
  if (p0.size() != (std::size_t{1} << nv))
    throw InvalidInput("train_rbm_cd1: target table size mismatch");
  RngStream rng(config.seed, 12345);
  std::vector<RBMTrainPoint> curve;
  Tensor batch({config.batch_size, nv});
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t s = 0; s < config.batch_size; ++s) {
      const std::size_t vb = rng.categorical(p0);
      for (std::size_t i = 0; i < nv; ++i) batch.at(s, i) = static_cast<double>((vb >> i) & 1);
    }
    cd1_update(params, batch, config.learning_rate, rng);
    if (step % config.log_every == 0 || step + 1 == config.steps) {
      curve.push_back({step, rbm_cross_entropy(p0, params), rbm_kl_divergence(p0, params)});
    }
  }
  return curve;
}

// --- QBM ---

void QBMModel::validate() const {
  if (basis.empty()) throw InvalidInput("QBMModel: empty operator basis");
  if (weights.size() != basis.size()) throw InvalidInput("QBMModel: weight count mismatch");
  const std::size_t d = basis[0].dim();
  if (d > 16) throw InvalidInput("QBMModel: dimension above 16");
  for (const ComplexMatrix& h : basis) {
    if (h.dim() != d) throw InvalidInput("QBMModel: basis dimensions differ");
    if (!h.is_hermitian(1e-12)) throw InvalidInput("QBMModel: basis operator not Hermitian");
  }
}

ComplexMatrix qbm_state(const QBMModel& model) {
  model.validate();
  const std::size_t d = model.dim();
  ComplexMatrix h_total(d);
  for (std::size_t j = 0; j < model.basis.size(); ++j) {
    ComplexMatrix term = model.basis[j];
    term *= cdouble{model.weights[j], 0.0};
    h_total += term;
  }
  const EigResult eig = hermitian_eig(h_total, 1e-10);
  const double lam_min = eig.values.back();
  std::vector<double> boltzmann(d);
  double z = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    boltzmann[k] = std::exp(-(eig.values[k] - lam_min));
    z += boltzmann[k];
  }
  ComplexMatrix sigma(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < d; ++k)
        acc += eig.vectors.at(i, k) * (boltzmann[k] / z) * std::conj(eig.vectors.at(j, k));
      sigma.at(i, j) = acc;
    }
  return sigma;
}

std::vector<double> qbm_gradient(const QBMModel& model, const ComplexMatrix& rho) {
  model.validate();
  if (rho.dim() != model.dim()) throw InvalidInput("qbm_gradient: dimension mismatch");
  const ComplexMatrix sigma = qbm_state(model);
  std::vector<double> grad(model.basis.size());
  for (std::size_t j = 0; j < model.basis.size(); ++j) {
    cdouble t_rho{0.0, 0.0}, t_sigma{0.0, 0.0};
    const std::size_t d = model.dim();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        t_rho += rho.at(i, k) * model.basis[j].at(k, i);
        t_sigma += sigma.at(i, k) * model.basis[j].at(k, i);
      }
    grad[j] = t_rho.real() - t_sigma.real();
  }
  return grad;
}

double relative_entropy(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw InvalidInput("relative_entropy: dimension mismatch");
  const EigResult er = hermitian_eig(rho, 1e-10);
  const EigResult es = hermitian_eig(sigma, 1e-10);
  for (double lam : es.values)
    if (lam < 1e-14)
      throw InvalidInput("relative_entropy: sigma is not full rank");

  double s = 0.0;
  for (double p : er.values)
    if (p > 1e-15) s += p * std::log(p);  // 0 ln 0 := 0

  // tr[rho ln sigma] = sum_k ln(lam_k) <u_k| rho |u_k>
  const std::size_t d = rho.dim();
  for (std::size_t k = 0; k < d; ++k) {
    cdouble quad{0.0, 0.0};
    for (std::size_t i = 0; i < d; ++i) {
      cdouble row{0.0, 0.0};
      for (std::size_t j = 0; j < d; ++j) row += rho.at(i, j) * es.vectors.at(j, k);
      quad += std::conj(es.vectors.at(i, k)) * row;
    }
    s -= std::log(es.values[k]) * quad.real();
  }
  return s;
}

std::vector<QBMTrainPoint> train_qbm(QBMModel& model, const ComplexMatrix& target, double eta,
                                     std::size_t steps, std::size_t log_every) {
  std::vector<QBMTrainPoint> curve;
  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<double> grad = qbm_gradient(model, target);
    for (std::size_t j = 0; j < model.weights.size(); ++j) model.weights[j] -= eta * grad[j];
    if (step % log_every == 0 || step + 1 == steps)
      curve.push_back({step, relative_entropy(target, qbm_state(model))});
  }
  return curve;
}

ComplexMatrix pauli_x() {
  ComplexMatrix m(2);
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 1.0;
  return m;
}

ComplexMatrix pauli_z() {
  ComplexMatrix m(2);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = -1.0;
  return m;
}

std::vector<ComplexMatrix> two_qubit_basis() {
  const ComplexMatrix x = pauli_x(), z = pauli_z(), id = ComplexMatrix::identity(2);
  return {kron(z, id), kron(id, z), kron(x, id), kron(id, x), kron(z, z), kron(x, x)};
}

}  // namespace qflrl::generative
