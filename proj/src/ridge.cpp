#include "dem/ridge.hpp"

#include "dem/linalg.hpp"

#include <cmath>

namespace dem {

RidgeModel fit_ridge(const Eigen::Ref<const Matrix>& source,
                     const Eigen::Ref<const Matrix>& target, Real lambda,
                     RidgeDirection direction) {
  if (source.cols() != target.cols()) {
    throw DimensionError("fit_ridge: source and target must share the sample count");
  }
  if (lambda < 0.0) throw ConfigError("fit_ridge: lambda must be nonnegative");

  const Index d = source.rows();
  Matrix gram = source * source.transpose();
  gram.diagonal().array() += lambda;
  // W = B A^T (A A^T + lambda I)^-1, computed via the SPD solve of the
  // transposed system.
  Matrix x = solve_spd(gram, source * target.transpose());   // (AA^T+lI)^-1 A B^T
  RidgeModel model;
  model.weight = x.transpose();
  model.direction = direction;
  model.lambda = lambda;

  const Matrix lhs = model.weight * gram;
  const Matrix rhs = target * source.transpose();
  const Real scale = std::max(rhs.norm(), Real(1));
  if ((lhs - rhs).norm() > 1e-8 * scale) {
    throw NumericError("fit_ridge: normal-equation residual exceeds 1e-8");
  }
  (void)d;
  return model;
}

Real shrinkage_ratio(const Eigen::Ref<const Matrix>& source, Real lambda) {
  if (lambda < 0.0) throw ConfigError("shrinkage_ratio: lambda must be nonnegative");
  // ||A^T (A A^T + lambda I)^-1 A||_2: the nonzero spectrum of that PSD matrix
  // equals the spectrum of L^-1 (A A^T) L^-T with LL^T = A A^T + lambda I, so
  // the norm comes from a small symmetric eigenproblem. (Power iteration is
  // useless here: the top eigenvalues sigma_i^2/(sigma_i^2+lambda) cluster.)
  const Matrix g = source * source.transpose();
  Matrix gram = g;
  gram.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw NumericError("shrinkage_ratio: A A^T + lambda I is not positive definite");
  }
  const Matrix half = llt.matrixL().solve(g);                       // L^-1 G
  const Matrix similar = llt.matrixL().solve(half.transpose());     // L^-1 G L^-T
  Eigen::SelfAdjointEigenSolver<Matrix> es(similar);
  if (es.info() != Eigen::Success) {
    throw NumericError("shrinkage_ratio: eigensolver failed");
  }
  const Real norm = es.eigenvalues().maxCoeff();
  const Real sigma = spectral_norm(source);
  const Real expected = lambda == 0.0 ? 1.0 : sigma * sigma / (sigma * sigma + lambda);
  if (std::abs(norm - expected) > 1e-6) {
    throw NumericError("shrinkage_ratio: computed norm " + format_real(norm) +
                       " disagrees with sigma^2/(sigma^2+lambda) = " + format_real(expected));
  }
  return norm;
}

ShrinkageReport shrinkage_check(const RidgeModel& model,
                                const Eigen::Ref<const Matrix>& source,
                                const Eigen::Ref<const Matrix>& target) {
  ShrinkageReport report;
  report.norm_mapped = spectral_norm(model.weight * source);
  report.norm_target = spectral_norm(target);
  report.satisfied = report.norm_mapped <= report.norm_target + 1e-9;
  return report;
}

}  // namespace dem
