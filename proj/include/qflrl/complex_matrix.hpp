#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "qflrl/errors.hpp"

namespace qflrl {

using cdouble = std::complex<double>;

/// Square complex matrix, row-major. Houses density matrices, Hamiltonians
/// and ladder operators on truncated Fock spaces.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, cdouble{0.0, 0.0}) {}

  static ComplexMatrix identity(std::size_t dim);

  std::size_t dim() const { return dim_; }

  cdouble& at(std::size_t i, std::size_t j) { return a_[i * dim_ + j]; }
  cdouble at(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

  cdouble* data() { return a_.data(); }
  const cdouble* data() const { return a_.data(); }

  ComplexMatrix adjoint() const;
  cdouble trace() const;

  /// max entrywise |M - M†|
  double hermiticity_defect() const;
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() < tol; }

  ComplexMatrix& operator+=(const ComplexMatrix& other);
  ComplexMatrix& operator-=(const ComplexMatrix& other);
  ComplexMatrix& operator*=(cdouble s);

  double max_abs() const;

 private:
  std::size_t dim_ = 0;
  std::vector<cdouble> a_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(cdouble s, ComplexMatrix a);
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

struct EigResult {
  std::vector<double> values;   // descending
  ComplexMatrix vectors;        // eigenvectors as columns, same order
};

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Input must be Hermitian within 1e-12 and of dim <= 64; throws
/// NumericalError if the sweep budget is exhausted before off-diagonal
/// entries fall below an internal threshold derived from `tol`.
EigResult hermitian_eig(const ComplexMatrix& m, double tol = 1e-10);

}  // namespace qflrl
