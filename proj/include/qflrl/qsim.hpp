#pragma once

#include <cstdint>
#include <vector>

#include "qflrl/complex_matrix.hpp"
#include "qflrl/rng.hpp"

namespace qflrl::qsim {

/// Density matrix on a truncated photon-number basis |0..N-1>.
struct FockDensityMatrix {
  ComplexMatrix rho;
  std::size_t cutoff() const { return rho.dim(); }

  static FockDensityMatrix fock(std::size_t n_cutoff, std::size_t n);
  static FockDensityMatrix vacuum(std::size_t n_cutoff) { return fock(n_cutoff, 0); }
  /// Truncated coherent state |alpha><alpha|, renormalized on the cutoff space.
  static FockDensityMatrix coherent(std::size_t n_cutoff, cdouble alpha);
  /// Mixture with the given diagonal populations (must sum to 1).
  static FockDensityMatrix diagonal_mixture(const std::vector<double>& populations);

  /// Hermiticity and unit trace at `tol`; eigenvalues above `eig_floor`.
  /// Exactly constructed states satisfy the default floor; states evolved by
  /// the first-order integrator carry an O(inner dt) floor instead.
  void assert_valid(double tol = 1e-10, double eig_floor = -1e-8) const;
};

enum class MeasurementOp { Lower, Number };  // homodyne A = a, QND A = n

struct SMEConfig {
  double kappa = 1.0;        // cavity decay rate
  double kappa_prime = 0.0;  // measurement rate
  double dt = 0.1;           // outer time step advanced per call
  std::size_t substeps = 10;
  MeasurementOp measurement = MeasurementOp::Number;
  std::size_t n_cutoff = 8;

  double inner_dt() const { return dt / static_cast<double>(substeps); }
  /// Spectral norm of the measurement operator on the truncated space.
  double measurement_norm() const;
  /// (kappa + 4 kappa' |A|^2) * inner dt, which must stay below 0.1.
  double stability_margin() const;
  void validate() const;
};

/// Lowering operator: a|n> = sqrt(n)|n-1>.
ComplexMatrix annihilation(std::size_t n_cutoff);

/// Resonant drive in the rotating frame: H = i sqrt(kappa)(alpha a† - alpha* a).
ComplexMatrix drive_hamiltonian(cdouble alpha_in, double kappa, std::size_t n_cutoff);

/// rate * (R rho R† - 1/2 {R†R, rho})
ComplexMatrix lindblad_dissipator(const ComplexMatrix& rho, const ComplexMatrix& collapse,
                                  double rate);

cdouble expectation(const ComplexMatrix& rho, const ComplexMatrix& op);

/// Diagonal element rho_nn: overlap with the Fock state |n>.
double fock_overlap(const FockDensityMatrix& rho, std::size_t n);

struct MeasurementSample {
  double x = 0.0;
};

struct SmeStepResult {
  std::vector<MeasurementSample> signal;  // one entry per inner step
  std::size_t leakage_warnings = 0;       // inner steps whose top level exceeded 1e-3
};

/// Advances rho by dt via Euler-Maruyama inner steps of the stochastic
/// master equation with drive, decay and measurement backaction; re-Hermitizes
/// and renormalizes after every inner step and emits the discretized signal
/// X_k = sqrt(kappa') <A + A†> + dW/dt_inner.
SmeStepResult sme_step(FockDensityMatrix& rho, const SMEConfig& config, cdouble alpha_in,
                       RngStream& rng);

/// Same dynamics with the noise term dropped: the deterministic ensemble
/// evolution used as the oracle for trajectory averages.
void lindblad_step(FockDensityMatrix& rho, const SMEConfig& config, cdouble alpha_in);

/// Shannon entropy (nats) of the photon-number distribution diag(rho).
double number_entropy(const FockDensityMatrix& rho);

}  // namespace qflrl::qsim
