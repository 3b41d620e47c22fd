#pragma once

#include "dem/types.hpp"

namespace dem {

/// Matrix product a*b. Throws DimensionError on inner-dimension mismatch and
/// NumericError if the result is not finite.
Matrix matmul(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b);

/// Solves m*X = rhs for symmetric positive definite m via Cholesky.
/// Verifies the relative residual is below 1e-8.
Matrix solve_spd(const Eigen::Ref<const Matrix>& m, const Eigen::Ref<const Matrix>& rhs);

/// Largest singular value by power iteration on m^T m (deterministic start
/// vector, capped at 1000 iterations, Rayleigh-quotient tolerance 1e-12).
Real spectral_norm(const Eigen::Ref<const Matrix>& m);

}  // namespace dem
