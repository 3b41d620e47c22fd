#pragma once

#include "dem/types.hpp"

namespace dem {

enum class RidgeDirection { kSemanticToVisual, kVisualToSemantic };

struct RidgeModel {
  Matrix weight;              // target_dim x source_dim
  RidgeDirection direction = RidgeDirection::kSemanticToVisual;
  Real lambda = 0.0;

  Matrix map(const Eigen::Ref<const Matrix>& source) const { return weight * source; }
};

/// Closed-form ridge fit W = B A^T (A A^T + lambda I)^-1, columns are samples.
/// Verifies the normal equations to 1e-8 relative.
RidgeModel fit_ridge(const Eigen::Ref<const Matrix>& source,
                     const Eigen::Ref<const Matrix>& target, Real lambda,
                     RidgeDirection direction = RidgeDirection::kSemanticToVisual);

/// ||A^T (A A^T + lambda I)^-1 A||_2, verified against sigma^2/(sigma^2+lambda)
/// for sigma the largest singular value of A (tolerance 1e-6).
Real shrinkage_ratio(const Eigen::Ref<const Matrix>& source, Real lambda);

struct ShrinkageReport {
  Real norm_mapped;    // ||W A||_2
  Real norm_target;    // ||B||_2
  bool satisfied;      // norm_mapped <= norm_target + 1e-9
};

ShrinkageReport shrinkage_check(const RidgeModel& model,
                                const Eigen::Ref<const Matrix>& source,
                                const Eigen::Ref<const Matrix>& target);

}  // namespace dem
