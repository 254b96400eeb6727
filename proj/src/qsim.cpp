#include "qflrl/qsim.hpp"

#include <algorithm>
#include <cmath>

namespace qflrl::qsim {

FockDensityMatrix FockDensityMatrix::fock(std::size_t n_cutoff, std::size_t n) {
  if (n >= n_cutoff) throw InvalidInput("fock state index beyond cutoff");
  FockDensityMatrix out{ComplexMatrix(n_cutoff)};
  out.rho.at(n, n) = 1.0;
  return out;
}

FockDensityMatrix FockDensityMatrix::coherent(std::size_t n_cutoff, cdouble alpha) {
  std::vector<cdouble> amp(n_cutoff);
  amp[0] = 1.0;
  for (std::size_t n = 1; n < n_cutoff; ++n)
    amp[n] = amp[n - 1] * alpha / std::sqrt(static_cast<double>(n));
  double norm = 0.0;
  for (const cdouble& a : amp) norm += std::norm(a);
  FockDensityMatrix out{ComplexMatrix(n_cutoff)};
  for (std::size_t i = 0; i < n_cutoff; ++i)
    for (std::size_t j = 0; j < n_cutoff; ++j)
      out.rho.at(i, j) = amp[i] * std::conj(amp[j]) / norm;
  return out;
}

FockDensityMatrix FockDensityMatrix::diagonal_mixture(const std::vector<double>& populations) {
  double sum = 0.0;
  for (double p : populations) {
    if (p < 0.0) throw InvalidInput("diagonal_mixture: negative population");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw InvalidInput("diagonal_mixture: populations must sum to 1");
  FockDensityMatrix out{ComplexMatrix(populations.size())};
  for (std::size_t n = 0; n < populations.size(); ++n) out.rho.at(n, n) = populations[n];
  return out;
}

void FockDensityMatrix::assert_valid(double tol, double eig_floor) const {
  if (rho.hermiticity_defect() >= tol)
    throw NumericalError("density matrix lost Hermiticity");
  if (std::fabs(rho.trace().real() - 1.0) >= tol || std::fabs(rho.trace().imag()) >= tol)
    throw NumericalError("density matrix lost unit trace");
  const EigResult eig = hermitian_eig(rho, 1e-9);
  if (eig.values.back() < eig_floor)
    throw NumericalError("density matrix developed a negative eigenvalue");
}

double SMEConfig::measurement_norm() const {
  const double top = static_cast<double>(n_cutoff - 1);
  return measurement == MeasurementOp::Number ? top : std::sqrt(top);
}

double SMEConfig::stability_margin() const {
  const double norm = measurement_norm();
  return (kappa + 4.0 * kappa_prime * norm * norm) * inner_dt();
}

void SMEConfig::validate() const {
  if (kappa < 0.0 || kappa_prime < 0.0) throw InvalidInput("SMEConfig: rates must be non-negative");
  if (!(dt > 0.0)) throw InvalidInput("SMEConfig: dt must be positive");
  if (substeps < 1) throw InvalidInput("SMEConfig: substeps must be at least 1");
  if (n_cutoff < 2) throw InvalidInput("SMEConfig: cutoff must be at least 2");
  if (stability_margin() >= 0.1)
    throw InvalidInput("SMEConfig: stability bound violated, (kappa + 4 kappa' |A|^2) dt_inner = " +
                       std::to_string(stability_margin()) + " >= 0.1");
}

ComplexMatrix annihilation(std::size_t n_cutoff) {
  if (n_cutoff < 2) throw InvalidInput("annihilation: cutoff must be at least 2");
  ComplexMatrix a(n_cutoff);
  for (std::size_t n = 1; n < n_cutoff; ++n)
    a.at(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

ComplexMatrix drive_hamiltonian(cdouble alpha_in, double kappa, std::size_t n_cutoff) {
  ComplexMatrix h(n_cutoff);
  const double root_kappa = std::sqrt(kappa);
  const cdouble i_unit{0.0, 1.0};
  for (std::size_t n = 1; n < n_cutoff; ++n) {
    const double root_n = std::sqrt(static_cast<double>(n));
    h.at(n, n - 1) = i_unit * root_kappa * alpha_in * root_n;          // from a†
    h.at(n - 1, n) = -i_unit * root_kappa * std::conj(alpha_in) * root_n;  // from a
  }
  return h;
}

ComplexMatrix lindblad_dissipator(const ComplexMatrix& rho, const ComplexMatrix& collapse,
                                  double rate) {
  if (rho.dim() != collapse.dim()) throw InvalidInput("lindblad_dissipator: dim mismatch");
  const ComplexMatrix collapse_dag = collapse.adjoint();
  const ComplexMatrix sandwich = matmul(matmul(collapse, rho), collapse_dag);
  const ComplexMatrix rdr = matmul(collapse_dag, collapse);
  ComplexMatrix anti = matmul(rdr, rho);
  anti += matmul(rho, rdr);
  ComplexMatrix out = sandwich;
  out -= cdouble{0.5, 0.0} * anti;
  out *= cdouble{rate, 0.0};
  return out;
}

cdouble expectation(const ComplexMatrix& rho, const ComplexMatrix& op) {
  if (rho.dim() != op.dim()) throw InvalidInput("expectation: dim mismatch");
  cdouble acc{0.0, 0.0};
  const std::size_t n = rho.dim();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) acc += rho.at(i, k) * op.at(k, i);
  return acc;
}

double fock_overlap(const FockDensityMatrix& rho, std::size_t n) {
  if (n >= rho.cutoff()) throw InvalidInput("fock_overlap: index beyond cutoff");
  return rho.rho.at(n, n).real();
}

namespace {

// Derivative of the deterministic part, written out with the ladder-operator
// structure so an inner step costs O(N^2):
//   -i[H,rho] + kappa D[a]rho + kappa' D[A]rho
void deterministic_derivative(const ComplexMatrix& rho, const SMEConfig& config, cdouble alpha,
                              ComplexMatrix& d) {
  const std::size_t n = rho.dim();
  const double rk = std::sqrt(config.kappa);
  const cdouble ac = std::conj(alpha);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = std::sqrt(static_cast<double>(i));
    const double ri1 = std::sqrt(static_cast<double>(i + 1));
    for (std::size_t j = 0; j < n; ++j) {
      const double rj = std::sqrt(static_cast<double>(j));
      const double rj1 = std::sqrt(static_cast<double>(j + 1));
      cdouble acc{0.0, 0.0};
      // drive: sqrt(kappa) [ alpha (a†rho - rho a†) - alpha* (a rho - rho a) ]
      if (config.kappa > 0.0 && alpha != cdouble{0.0, 0.0}) {
        cdouble drv{0.0, 0.0};
        if (i > 0) drv += alpha * ri * rho.at(i - 1, j);
        if (j + 1 < n) drv -= alpha * rj1 * rho.at(i, j + 1);
        if (i + 1 < n) drv -= ac * ri1 * rho.at(i + 1, j);
        if (j > 0) drv += ac * rj * rho.at(i, j - 1);
        acc += rk * drv;
      }
      // decay: kappa (a rho a† - 1/2 {n, rho})
      if (config.kappa > 0.0) {
        cdouble dec{0.0, 0.0};
        if (i + 1 < n && j + 1 < n) dec += ri1 * rj1 * rho.at(i + 1, j + 1);
        dec -= 0.5 * static_cast<double>(i + j) * rho.at(i, j);
        acc += config.kappa * dec;
      }
      // measurement dissipator
      if (config.kappa_prime > 0.0) {
        if (config.measurement == MeasurementOp::Number) {
          const double diff = static_cast<double>(i) - static_cast<double>(j);
          acc += config.kappa_prime * (-0.5 * diff * diff) * rho.at(i, j);
        } else {
          cdouble dec{0.0, 0.0};
          if (i + 1 < n && j + 1 < n) dec += ri1 * rj1 * rho.at(i + 1, j + 1);
          dec -= 0.5 * static_cast<double>(i + j) * rho.at(i, j);
          acc += config.kappa_prime * dec;
        }
      }
      d.at(i, j) = acc;
    }
  }
}

// m = A rho + rho A†; returns tr(m) = <A + A†>
double measurement_term(const ComplexMatrix& rho, MeasurementOp op, ComplexMatrix& m) {
  const std::size_t n = rho.dim();
  if (op == MeasurementOp::Number) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        m.at(i, j) = static_cast<double>(i + j) * rho.at(i, j);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cdouble acc{0.0, 0.0};
        if (i + 1 < n) acc += std::sqrt(static_cast<double>(i + 1)) * rho.at(i + 1, j);
        if (j + 1 < n) acc += std::sqrt(static_cast<double>(j + 1)) * rho.at(i, j + 1);
        m.at(i, j) = acc;
      }
  }
  return m.trace().real();
}

void hermitize_and_renormalize(ComplexMatrix& rho) {
  const std::size_t n = rho.dim();
  for (std::size_t i = 0; i < n; ++i) {
    rho.at(i, i) = rho.at(i, i).real();
    for (std::size_t j = i + 1; j < n; ++j) {
      const cdouble avg = 0.5 * (rho.at(i, j) + std::conj(rho.at(j, i)));
      rho.at(i, j) = avg;
      rho.at(j, i) = std::conj(avg);
    }
  }
  const double tr = rho.trace().real();
  if (tr < 0.5)
    throw NumericalError("sme_step: trace collapsed below 0.5, integration blew up");
  rho *= cdouble{1.0 / tr, 0.0};
}

}  // namespace

SmeStepResult sme_step(FockDensityMatrix& state, const SMEConfig& config, cdouble alpha_in,
                       RngStream& rng) {
  config.validate();
  if (state.cutoff() != config.n_cutoff)
    throw InvalidInput("sme_step: state cutoff does not match config");
  const std::size_t n = config.n_cutoff;
  const double h = config.inner_dt();
  const double root_kp = std::sqrt(config.kappa_prime);

  SmeStepResult out;
  out.signal.reserve(config.substeps);
  ComplexMatrix deriv(n), m(n);
  for (std::size_t k = 0; k < config.substeps; ++k) {
    deterministic_derivative(state.rho, config, alpha_in, deriv);
    const double dw = rng.gaussian(0.0, std::sqrt(h));
    double tr_m = 0.0;
    if (config.kappa_prime > 0.0) {
      tr_m = measurement_term(state.rho, config.measurement, m);
      for (std::size_t i = 0; i < n * n; ++i)
        state.rho.data()[i] += h * deriv.data()[i] +
                               root_kp * dw * (m.data()[i] - tr_m * state.rho.data()[i]);
    } else {
      for (std::size_t i = 0; i < n * n; ++i) state.rho.data()[i] += h * deriv.data()[i];
    }
    hermitize_and_renormalize(state.rho);
    if (state.rho.at(n - 1, n - 1).real() > 1e-3) out.leakage_warnings += 1;
    out.signal.push_back({root_kp * tr_m + dw / h});
  }
  return out;
}

void lindblad_step(FockDensityMatrix& state, const SMEConfig& config, cdouble alpha_in) {
  config.validate();
  if (state.cutoff() != config.n_cutoff)
    throw InvalidInput("lindblad_step: state cutoff does not match config");
  const std::size_t n = config.n_cutoff;
  const double h = config.inner_dt();
  ComplexMatrix deriv(n);
  for (std::size_t k = 0; k < config.substeps; ++k) {
    deterministic_derivative(state.rho, config, alpha_in, deriv);
    for (std::size_t i = 0; i < n * n; ++i) state.rho.data()[i] += h * deriv.data()[i];
    hermitize_and_renormalize(state.rho);
  }
}

double number_entropy(const FockDensityMatrix& state) {
  double entropy = 0.0;
  for (std::size_t i = 0; i < state.cutoff(); ++i) {
    const double p = state.rho.at(i, i).real();
    if (p > 1e-15) entropy -= p * std::log(p);
  }
  return entropy;
}

}  // namespace qflrl::qsim
