#include <cmath>

#include "doctest.h"
#include "qflrl/qsim.hpp"
#include "test_helpers.hpp"

using namespace qflrl;
using namespace qflrl::qsim;

namespace {

ComplexMatrix number_operator(std::size_t n) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = static_cast<double>(i);
  return m;
}

ComplexMatrix random_density(std::size_t n, RngStream& rng) {
  // G G† normalized to unit trace is a valid density matrix
  ComplexMatrix g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.at(i, j) = cdouble{rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
  ComplexMatrix rho = matmul(g, g.adjoint());
  rho *= cdouble{1.0 / rho.trace().real(), 0.0};
  return rho;
}

}  // namespace

TEST_CASE("annihilation lowers fock states") {
  ComplexMatrix a = annihilation(4);
  // a|1> = |0>
  CHECK(a.at(0, 1).real() == doctest::Approx(1.0));
  // a|0> = 0
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a.at(i, 0)) == 0.0);
  // a|2> = sqrt(2)|1>
  CHECK(a.at(1, 2).real() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("commutator [a, a†] is the identity below the truncation edge") {
  const std::size_t n = 6;
  ComplexMatrix a = annihilation(n);
  ComplexMatrix comm = matmul(a, a.adjoint());
  comm -= matmul(a.adjoint(), a);
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = 0; j + 1 < n; ++j)
      CHECK(std::abs(comm.at(i, j) - (i == j ? cdouble{1.0, 0.0} : cdouble{0.0, 0.0})) < 1e-12);
  // truncation shows up only in the top corner: a a† vanishes there
  CHECK(comm.at(n - 1, n - 1).real() == doctest::Approx(-(static_cast<double>(n) - 1.0)));
}

TEST_CASE("drive_hamiltonian: zero drive, hermiticity, first-order action on vacuum") {
  CHECK(drive_hamiltonian(0.0, 1.0, 5).max_abs() == 0.0);

  const cdouble alpha{0.4, -0.3};
  ComplexMatrix h = drive_hamiltonian(alpha, 2.0, 5);
  CHECK(h.hermiticity_defect() < 1e-15);

  // one Euler step of psi' = psi - i dt H psi from |0> populates |1> with
  // amplitude dt sqrt(kappa) alpha, the displacement direction of the drive
  const double dt = 1e-4;
  const cdouble amp1 = cdouble{0.0, -1.0} * dt * h.at(1, 0);
  CHECK(std::abs(amp1 - dt * std::sqrt(2.0) * alpha) < 1e-15);
}

TEST_CASE("lindblad_dissipator: vacuum is dark for the lowering operator") {
  ComplexMatrix rho(3);
  rho.at(0, 0) = 1.0;
  ComplexMatrix d = lindblad_dissipator(rho, annihilation(3), 1.0);
  CHECK(d.max_abs() < 1e-15);
}

TEST_CASE("lindblad_dissipator is traceless for random inputs") {
  RngStream rng(51);
  for (int rep = 0; rep < 4; ++rep) {
    ComplexMatrix rho = random_density(5, rng);
    ComplexMatrix r(5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        r.at(i, j) = cdouble{rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
    ComplexMatrix d = lindblad_dissipator(rho, r, 0.7);
    CHECK(std::abs(d.trace()) < 1e-12);
  }
}

TEST_CASE("lindblad_dissipator decay rate of one photon") {
  const double kappa = 1.3;
  ComplexMatrix rho(3);
  rho.at(1, 1) = 1.0;
  ComplexMatrix d = lindblad_dissipator(rho, annihilation(3), kappa);
  // d<n>/dt = tr(n * D) = -kappa at <n> = 1
  const cdouble dn = expectation(d, number_operator(3));
  CHECK(dn.real() == doctest::Approx(-kappa));
  CHECK(std::fabs(dn.imag()) < 1e-14);
}

TEST_CASE("structured derivative agrees with the generic operator algebra") {
  // one deterministic inner step vs -i[H,rho] + kappa D[a]rho + kappa' D[A]rho
  RngStream rng(52);
  for (MeasurementOp op : {MeasurementOp::Number, MeasurementOp::Lower}) {
    SMEConfig config;
    config.kappa = 0.8;
    config.kappa_prime = 0.01;
    config.n_cutoff = 6;
    config.dt = 1e-4;
    config.substeps = 1;
    config.measurement = op;
    const cdouble alpha{0.3, 0.2};

    FockDensityMatrix state{random_density(6, rng)};
    FockDensityMatrix evolved = state;
    lindblad_step(evolved, config, alpha);

    const ComplexMatrix a = annihilation(6);
    const ComplexMatrix h = drive_hamiltonian(alpha, config.kappa, 6);
    const ComplexMatrix meas = op == MeasurementOp::Number ? number_operator(6) : a;
    ComplexMatrix deriv = lindblad_dissipator(state.rho, a, config.kappa);
    deriv += lindblad_dissipator(state.rho, meas, config.kappa_prime);
    ComplexMatrix comm = matmul(h, state.rho);
    comm -= matmul(state.rho, h);
    comm *= cdouble{0.0, -1.0};
    deriv += comm;

    ComplexMatrix expected = state.rho;
    for (std::size_t i = 0; i < 36; ++i)
      expected.data()[i] += config.dt * deriv.data()[i];
    expected *= cdouble{1.0 / expected.trace().real(), 0.0};

    ComplexMatrix diff = evolved.rho;
    diff -= expected;
    CHECK(diff.max_abs() < 1e-13);
  }
}

TEST_CASE("sme_step reproduces the analytic decay law") {
  SMEConfig config;
  config.kappa = 1.0;
  config.kappa_prime = 0.0;
  config.dt = 0.1;
  config.substeps = 100;  // inner dt = 1e-3
  config.n_cutoff = 4;
  FockDensityMatrix state = FockDensityMatrix::fock(4, 1);
  RngStream rng(53);
  const ComplexMatrix n_op = number_operator(4);
  double t = 0.0;
  for (int k = 0; k < 30; ++k) {
    sme_step(state, config, 0.0, rng);
    t += config.dt;
    const double n_mean = expectation(state.rho, n_op).real();
    const double exact = std::exp(-config.kappa * t);
    CHECK(std::fabs(n_mean - exact) <= 2.0 * config.inner_dt() * config.kappa * t + 1e-12);
    state.assert_valid(1e-10, -0.1 * config.inner_dt());
  }
}

TEST_CASE("sme_step reproduces the driven amplitude transient") {
  SMEConfig config;
  config.kappa = 1.0;
  config.kappa_prime = 0.0;
  config.dt = 0.1;
  config.substeps = 100;
  config.n_cutoff = 10;
  const double alpha = 0.4;  // steady amplitude 2 alpha / sqrt(kappa) = 0.8
  FockDensityMatrix state = FockDensityMatrix::vacuum(10);
  RngStream rng(54);
  const ComplexMatrix a = annihilation(10);
  double t = 0.0;
  for (int k = 0; k < 40; ++k) {
    sme_step(state, config, alpha, rng);
    t += config.dt;
    const double amp = expectation(state.rho, a).real();
    const double exact = 2.0 * alpha / std::sqrt(config.kappa) *
                         (1.0 - std::exp(-config.kappa * t / 2.0));
    CHECK(std::fabs(amp - exact) <= 2.0 * config.inner_dt() * config.kappa * t + 1e-12);
  }
  // eigenvalue floor at the first-order integrator scale
  state.assert_valid(1e-10, -0.1 * config.inner_dt());
}

TEST_CASE("free evolution leaves rho alone and the signal is pure noise") {
  SMEConfig config;
  config.kappa = 0.0;
  config.kappa_prime = 0.0;
  config.dt = 0.5;
  config.substeps = 500;
  config.n_cutoff = 3;
  FockDensityMatrix state = FockDensityMatrix::fock(3, 1);
  RngStream rng(55);
  std::vector<double> xs;
  for (int rep = 0; rep < 20; ++rep) {
    const SmeStepResult r = sme_step(state, config, 0.0, rng);
    for (const MeasurementSample& s : r.signal) xs.push_back(s.x);
  }
  CHECK(state.rho.at(1, 1).real() == doctest::Approx(1.0));

  // Var(X) = 1/dt_inner
  double var = 0.0;
  for (double x : xs) var += x * x;
  var /= static_cast<double>(xs.size());
  const double expected = 1.0 / config.inner_dt();
  const double se = expected * std::sqrt(2.0 / static_cast<double>(xs.size()));
  CHECK(std::fabs(var - expected) < 5.0 * se);
}

TEST_CASE("expectation basics and linearity") {
  const std::size_t n = 5;
  ComplexMatrix n_op = number_operator(n);
  for (std::size_t k = 0; k < n; ++k) {
    FockDensityMatrix state = FockDensityMatrix::fock(n, k);
    CHECK(expectation(state.rho, n_op).real() == doctest::Approx(static_cast<double>(k)));
    CHECK(expectation(state.rho, ComplexMatrix::identity(n)).real() == doctest::Approx(1.0));
  }
  RngStream rng(56);
  ComplexMatrix rho = random_density(n, rng);
  ComplexMatrix op1(n), op2(n);
  for (std::size_t i = 0; i < n * n; ++i) {
    op1.data()[i] = cdouble{rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
    op2.data()[i] = cdouble{rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
  }
  const cdouble lhs = expectation(rho, op1 + op2);
  const cdouble rhs = expectation(rho, op1) + expectation(rho, op2);
  CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("fock_overlap values") {
  FockDensityMatrix one = FockDensityMatrix::fock(8, 1);
  CHECK(fock_overlap(one, 1) == doctest::Approx(1.0));

  FockDensityMatrix coh = FockDensityMatrix::coherent(16, 1.0);  // |alpha|^2 = 1
  CHECK(fock_overlap(coh, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-4));

  double total = 0.0;
  for (std::size_t n = 0; n < 16; ++n) total += fock_overlap(coh, n);
  CHECK(std::fabs(total - 1.0) < 1e-10);

  CHECK_THROWS_AS(fock_overlap(one, 8), InvalidInput);
}

TEST_CASE("qnd measurement: per-trajectory collapse and ensemble mean (smoke)") {
  SMEConfig config;
  config.kappa = 0.0;
  config.kappa_prime = 1.0;
  config.dt = 0.5;
  config.substeps = 250;  // margin = 4*9*0.002 = 0.072
  config.n_cutoff = 4;
  config.measurement = MeasurementOp::Number;
  const std::vector<double> pops{0.25, 0.25, 0.25, 0.25};

  const std::size_t n_traj = 200;
  std::vector<double> final_entropy(n_traj), mean_n(n_traj);
  for (std::size_t k = 0; k < n_traj; ++k) {
    FockDensityMatrix state = FockDensityMatrix::diagonal_mixture(pops);
    RngStream rng(57, k);
    for (int step = 0; step < 16; ++step) sme_step(state, config, 0.0, rng);  // kappa' t = 8
    final_entropy[k] = number_entropy(state);
    mean_n[k] = expectation(state.rho, number_operator(4)).real();
    state.assert_valid(1e-10, -0.1 * config.inner_dt());
  }
  std::sort(final_entropy.begin(), final_entropy.end());
  CHECK(final_entropy[n_traj / 2] < 0.1);  // median collapsed

  // the ensemble mean of <n> stays at its initial value 1.5
  const auto ms = qflrl::testing::mean_stderr(mean_n);
  CHECK(std::fabs(ms.mean - 1.5) < 4.0 * ms.stderr_of_mean);
}

TEST_CASE("stability bound is enforced") {
  SMEConfig config;
  config.kappa = 1.0;
  config.kappa_prime = 0.5;
  config.n_cutoff = 8;
  config.dt = 0.2;
  config.substeps = 20;  // margin = 99 * 0.01, far above the limit
  CHECK_THROWS_AS(config.validate(), InvalidInput);
  config.substeps = 200;
  CHECK_NOTHROW(config.validate());
}
