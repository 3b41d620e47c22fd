#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dem {

using Real = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Contract violations on shapes or argument ranges.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failures: non-finite values, failed factorizations, non-convergence.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-format and filesystem problems; messages name the offending file/record.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid run configuration (CLI flags, config files).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Throws NumericError if any entry of m is NaN or infinite.
void ensure_finite(const Eigen::Ref<const Matrix>& m, const char* what);

/// Shortest decimal form that round-trips a double (used by all CSV writers so
/// reruns are byte-identical).
std::string format_real(Real v);

}  // namespace dem
