#include "dem/linalg.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>

namespace dem {

void ensure_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entries");
  }
}

std::string format_real(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Matrix matmul(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) +
                         " and " + std::to_string(b.rows()) + " differ");
  }
  Matrix c = a * b;
  ensure_finite(c, "matmul result");
  return c;
}

Matrix solve_spd(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& rhs) {
  if (m.rows() != m.cols()) {
    throw DimensionError("solve_spd: matrix must be square");
  }
  if (rhs.rows() != m.rows()) {
    throw DimensionError("solve_spd: rhs has " + std::to_string(rhs.rows()) +
                         " rows, expected " + std::to_string(m.rows()));
  }
  if (!m.isApprox(m.transpose(), 1e-10)) {
    throw NumericError("solve_spd: matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError("solve_spd: Cholesky factorization failed (matrix not positive definite)");
  }
  Matrix x = llt.solve(rhs);
  ensure_finite(x, "solve_spd result");
  const Real rhs_norm = rhs.norm();
  const Real resid = (m * x - rhs).norm();
  if (resid > 1e-8 * std::max(rhs_norm, Real(1))) {
    throw NumericError("solve_spd: residual " + format_real(resid) + " exceeds tolerance");
  }
  return x;
}

Real spectral_norm(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw DimensionError("spectral_norm: empty matrix");
  }
  ensure_finite(m, "spectral_norm input");
  if (m.isZero(0.0)) return 0.0;

  // Power iteration on the Gram matrix of the smaller side.
  const bool tall = m.rows() >= m.cols();
  Matrix gram = tall ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
  const Index n = gram.rows();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<Real>(n));
  Real prev = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vector w = gram * v;
    const Real norm = w.norm();
    if (norm == 0.0) {
      // Start vector in the null space; nudge deterministically.
      v.setZero();
      v[it % n] = 1.0;
      continue;
    }
    v = w / norm;
    const Real rayleigh = v.dot(gram * v);
    if (it > 0 && std::abs(rayleigh - prev) <= 1e-12 * std::max(rayleigh, Real(1))) {
      return std::sqrt(rayleigh);
    }
    prev = rayleigh;
  }
  throw NumericError("spectral_norm: power iteration did not converge in 1000 iterations");
}

}  // namespace dem
