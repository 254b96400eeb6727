#include "qflrl/complex_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qflrl {

ComplexMatrix ComplexMatrix::identity(std::size_t dim) {
  ComplexMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix m(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m.at(j, i) = std::conj(at(i, j));
  return m;
}

cdouble ComplexMatrix::trace() const {
  cdouble t{0.0, 0.0};
  for (std::size_t i = 0; i < dim_; ++i) t += at(i, i);
  return t;
}

double ComplexMatrix::hermiticity_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = i; j < dim_; ++j)
      worst = std::max(worst, std::abs(at(i, j) - std::conj(at(j, i))));
  return worst;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
  if (dim_ != other.dim_) throw InvalidInput("complex matrix +=: dim mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += other.a_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
  if (dim_ != other.dim_) throw InvalidInput("complex matrix -=: dim mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= other.a_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cdouble s) {
  for (cdouble& v : a_) v *= s;
  return *this;
}

double ComplexMatrix::max_abs() const {
  double m = 0.0;
  for (const cdouble& v : a_) m = std::max(m, std::abs(v));
  return m;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(cdouble s, ComplexMatrix a) { return a *= s; }

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidInput("complex matmul: dim mismatch");
  const std::size_t n = a.dim();
  ComplexMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < n; ++p) {
      const cdouble aip = a.at(i, p);
      if (aip == cdouble{0.0, 0.0}) continue;
      const cdouble* bp = b.data() + p * n;
      cdouble* ci = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  return c;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t na = a.dim(), nb = b.dim();
  ComplexMatrix out(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) {
      const cdouble aij = a.at(i, j);
      if (aij == cdouble{0.0, 0.0}) continue;
      for (std::size_t k = 0; k < nb; ++k)
        for (std::size_t l = 0; l < nb; ++l)
          out.at(i * nb + k, j * nb + l) = aij * b.at(k, l);
    }
  return out;
}

namespace {

// One complex Jacobi rotation in the (p,q) plane: a phase on column q makes
// the pivot real, then a real Givens rotation annihilates it.
void jacobi_rotate(ComplexMatrix& b, ComplexMatrix& v, std::size_t p, std::size_t q) {
  const cdouble apq = b.at(p, q);
  const double r = std::abs(apq);
  if (r == 0.0) return;
  const cdouble phase = apq / r;                 // e^{i phi}
  const cdouble phase_conj = std::conj(phase);   // e^{-i phi}

  const double app = b.at(p, p).real();
  const double aqq = b.at(q, q).real();
  const double tau = (aqq - app) / (2.0 * r);
  double t;
  if (tau >= 0.0)
    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
  else
    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;

  const std::size_t n = b.dim();
  // B <- J^dagger B J with J[:,p] = c e_p - s e^{-i phi} e_q,
  //                       J[:,q] = s e_p + c e^{-i phi} e_q.
  for (std::size_t i = 0; i < n; ++i) {  // columns
    const cdouble bip = b.at(i, p);
    const cdouble biq = b.at(i, q) * phase_conj;
    b.at(i, p) = c * bip - s * biq;
    b.at(i, q) = s * bip + c * biq;
  }
  for (std::size_t j = 0; j < n; ++j) {  // rows
    const cdouble bpj = b.at(p, j);
    const cdouble bqj = b.at(q, j) * phase;
    b.at(p, j) = c * bpj - s * bqj;
    b.at(q, j) = s * bpj + c * bqj;
  }
  b.at(p, q) = 0.0;
  b.at(q, p) = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cdouble vip = v.at(i, p);
    const cdouble viq = v.at(i, q) * phase_conj;
    v.at(i, p) = c * vip - s * viq;
    v.at(i, q) = s * vip + c * viq;
  }
}

double max_offdiag(const ComplexMatrix& b) {
  double m = 0.0;
  for (std::size_t p = 0; p + 1 < b.dim(); ++p)
    for (std::size_t q = p + 1; q < b.dim(); ++q) m = std::max(m, std::abs(b.at(p, q)));
  return m;
}

}  // namespace

EigResult hermitian_eig(const ComplexMatrix& m, double tol) {
  const std::size_t n = m.dim();
  if (n == 0) throw InvalidInput("hermitian_eig: empty matrix");
  if (n > 64) throw InvalidInput("hermitian_eig: dim exceeds 64");
  if (!m.is_hermitian(1e-12))
    throw InvalidInput("hermitian_eig: input is not Hermitian within 1e-12");

  ComplexMatrix b = m;
  ComplexMatrix v = ComplexMatrix::identity(n);
  const double scale = std::max(b.max_abs(), 1e-300);
  const double stop = std::max(std::min(tol * 1e-2, 1e-13) * scale, 1e-300);

  constexpr int kMaxSweeps = 60;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    if (max_offdiag(b) < stop) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (std::abs(b.at(p, q)) > stop * 1e-2) jacobi_rotate(b, v, p, q);
  }
  if (sweep == kMaxSweeps && max_offdiag(b) >= stop)
    throw NumericalError("hermitian_eig: no convergence within sweep budget");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return b.at(i, i).real() > b.at(j, j).real();
  });

  EigResult out;
  out.values.resize(n);
  out.vectors = ComplexMatrix(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = b.at(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, k) = v.at(i, order[k]);
  }
  return out;
}

}  // namespace qflrl
