#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "qflrl/complex_matrix.hpp"
#include "qflrl/rng.hpp"
#include "qflrl/tensor.hpp"
#include "test_helpers.hpp"

using namespace qflrl;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.gaussian(0.0, 1.0);
  return t;
}

ComplexMatrix random_hermitian(std::size_t n, RngStream& rng) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.at(i, i) = rng.gaussian(0.0, 1.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const cdouble v{rng.gaussian(0.0, 1.0), rng.gaussian(0.0, 1.0)};
      m.at(i, j) = v;
      m.at(j, i) = std::conj(v);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("matmul identity and permutation") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor prod = matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(prod[i] == a[i]);

  Tensor swap({2, 2}, {0, 1, 1, 0});
  Tensor col({2, 1}, {5.0, 7.0});
  Tensor swapped = matmul(swap, col);
  CHECK(swapped[0] == 7.0);
  CHECK(swapped[1] == 5.0);
}

TEST_CASE("matmul matches naive triple-loop oracle") {
  RngStream rng(11);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(std::fabs(c.at(i, j) - acc) < 1e-12);
    }
}

TEST_CASE("matmul rejects shape mismatch") {
  Tensor a({2, 3});
  Tensor b({2, 2});
  CHECK_THROWS_AS(matmul(a, b), InvalidInput);
}

TEST_CASE("matmul associativity on random triples") {
  RngStream rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({3, 5}, rng);
    Tensor c = random_tensor({5, 2}, rng);
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max(1.0, std::fabs(left[i]));
      CHECK(std::fabs(left[i] - right[i]) / scale < 1e-10);
    }
  }
}

TEST_CASE("hermitian_eig diagonal matrix") {
  ComplexMatrix m(3);
  m.at(0, 0) = 3.0;
  m.at(1, 1) = 1.0;
  m.at(2, 2) = 2.0;
  EigResult r = hermitian_eig(m);
  CHECK(r.values[0] == doctest::Approx(3.0));
  CHECK(r.values[1] == doctest::Approx(2.0));
  CHECK(r.values[2] == doctest::Approx(1.0));
  // axis eigenvectors up to phase
  CHECK(std::abs(r.vectors.at(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(r.vectors.at(2, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(r.vectors.at(1, 2)) == doctest::Approx(1.0));
}

TEST_CASE("hermitian_eig pauli-x spectrum") {
  ComplexMatrix m(2);
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 1.0;
  EigResult r = hermitian_eig(m);
  CHECK(r.values[0] == doctest::Approx(1.0));
  CHECK(r.values[1] == doctest::Approx(-1.0));
}

TEST_CASE("hermitian_eig reconstructs random matrices") {
  RngStream rng(3);
  ComplexMatrix m = random_hermitian(8, rng);
  EigResult r = hermitian_eig(m, 1e-10);

  // V Lambda V^dagger == m
  ComplexMatrix lam(8);
  for (std::size_t i = 0; i < 8; ++i) lam.at(i, i) = r.values[i];
  ComplexMatrix rebuilt = matmul(matmul(r.vectors, lam), r.vectors.adjoint());
  rebuilt -= m;
  CHECK(rebuilt.max_abs() < 1e-9);

  // eigenvalues descending, sum = trace
  for (std::size_t i = 0; i + 1 < 8; ++i) CHECK(r.values[i] >= r.values[i + 1]);
  double sum = 0.0;
  for (double v : r.values) sum += v;
  CHECK(std::fabs(sum - m.trace().real()) < 1e-10);

  // eigenvector Gram matrix = identity
  ComplexMatrix gram = matmul(r.vectors.adjoint(), r.vectors);
  gram -= ComplexMatrix::identity(8);
  CHECK(gram.max_abs() < 1e-9);
}

TEST_CASE("hermitian_eig rejects bad input") {
  ComplexMatrix m(2);
  m.at(0, 1) = cdouble{0.0, 1.0};
  m.at(1, 0) = cdouble{0.0, 1.0};  // not Hermitian: conj would flip the sign
  CHECK_THROWS_AS(hermitian_eig(m), InvalidInput);
  CHECK_THROWS_AS(hermitian_eig(ComplexMatrix(65)), InvalidInput);
}

TEST_CASE("rng determinism across instances") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(42, 8);
  bool all_equal = true;
  RngStream a2(42, 7);
  for (int i = 0; i < 64; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("bernoulli(0) is always 0 and parameter validation") {
  RngStream rng(1);
  for (int i = 0; i < 200; ++i) CHECK(rng.bernoulli(0.0) == 0);
  CHECK_THROWS_AS(rng.bernoulli(1.5), InvalidInput);
  CHECK_THROWS_AS(rng.gaussian(0.0, 0.0), InvalidInput);
  std::vector<double> bad{0.5, 0.2};
  CHECK_THROWS_AS(rng.categorical(bad), InvalidInput);
}

TEST_CASE("gaussian sample mean obeys the CLT bound") {
  RngStream rng(5);
  const std::size_t n = 1000000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += rng.gaussian(0.0, 1.0);
  CHECK(std::fabs(sum / static_cast<double>(n)) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("categorical passes chi-square at the 99.9% level") {
  RngStream rng(9);
  const std::vector<double> probs{0.5, 0.5};
  const std::size_t n = 100000;
  std::vector<std::size_t> counts(2, 0);
  for (std::size_t i = 0; i < n; ++i) counts[rng.categorical(probs)]++;
  const double stat = qflrl::testing::chi_square_statistic(counts, probs, n);
  CHECK(stat < qflrl::testing::chi_square_999(1));
}

TEST_CASE("categorical never yields a zero-probability index") {
  RngStream rng(13);
  const std::vector<double> probs{0.0, 0.7, 0.0, 0.3};
  for (int i = 0; i < 20000; ++i) {
    const std::size_t k = rng.categorical(probs);
    CHECK((k == 1 || k == 3));
  }
}

TEST_CASE("binomial mean is close to n*p") {
  RngStream rng(17);
  const int n = 100;
  const double p = 0.3;
  double sum = 0.0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) sum += rng.binomial(n, p);
  const double mean = sum / reps;
  const double se = std::sqrt(n * p * (1 - p) / static_cast<double>(reps));
  CHECK(std::fabs(mean - n * p) < 5.0 * se);
}
