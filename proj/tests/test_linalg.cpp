#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dem/linalg.hpp"
#include "dem/rng.hpp"

#include <Eigen/SVD>

using namespace dem;

TEST_CASE("matmul identity and hand values") {
  Rng rng(7);
  Matrix m = rng.normal_matrix(2, 2);
  Matrix id = Matrix::Identity(2, 2);
  CHECK((matmul(id, m) - m).norm() == doctest::Approx(0.0));

  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Matrix b(2, 1);
  b << 0, 1;
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == doctest::Approx(2.0));
  CHECK(c(1, 0) == doctest::Approx(4.0));
}

TEST_CASE("matmul rejects inner-dimension mismatch") {
  Matrix a = Matrix::Zero(2, 3);
  Matrix b = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = rng.normal_matrix(4, 6);
    Matrix b = rng.normal_matrix(6, 3);
    Matrix c = rng.normal_matrix(3, 5);
    Matrix left = matmul(matmul(a, b), c);
    Matrix right = matmul(a, matmul(b, c));
    CHECK((left - right).norm() <= 1e-9 * right.norm());
  }
}

TEST_CASE("solve_spd identity and diagonal cases") {
  Rng rng(3);
  Matrix rhs = rng.normal_matrix(4, 2);
  Matrix id = Matrix::Identity(4, 4);
  CHECK((solve_spd(id, rhs) - rhs).norm() == doctest::Approx(0.0));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  Matrix r(2, 1);
  r << 2, 4;
  Matrix x = solve_spd(d, r);
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("solve_spd rejects singular and mismatched inputs") {
  Matrix zeros = Matrix::Zero(2, 2);
  Matrix rhs = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(solve_spd(zeros, rhs), NumericError);
  CHECK_THROWS_AS(solve_spd(Matrix::Identity(3, 3), rhs), DimensionError);
}

TEST_CASE("solve_spd multiply-back recovers rhs") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = rng.normal_matrix(6, 6);
    Matrix spd = a * a.transpose() + 0.5 * Matrix::Identity(6, 6);
    Matrix rhs = rng.normal_matrix(6, 3);
    Matrix x = solve_spd(spd, rhs);
    CHECK((spd * x - rhs).norm() <= 1e-8 * rhs.norm());
  }
}

TEST_CASE("spectral_norm of identity and diagonal") {
  CHECK(spectral_norm(Matrix::Identity(5, 5)) == doctest::Approx(1.0));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(spectral_norm(d) == doctest::Approx(3.0));
}

TEST_CASE("spectral_norm rejects empty input") {
  Matrix empty(0, 0);
  CHECK_THROWS_AS(spectral_norm(empty), DimensionError);
}

TEST_CASE("spectral_norm matches the Jacobi SVD oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m = rng.normal_matrix(5, 7);
    Eigen::JacobiSVD<Matrix> svd(m);
    const Real expected = svd.singularValues()(0);
    CHECK(spectral_norm(m) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("spectral_norm scales homogeneously") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix m = rng.normal_matrix(4, 6);
    const Real c = rng.uniform(-3.0, 3.0);
    const Real base = spectral_norm(m);
    if (c == 0.0) continue;
    CHECK(spectral_norm(Matrix(c * m)) == doctest::Approx(std::abs(c) * base).epsilon(1e-6));
  }
}
