#pragma once

#include "dem/model.hpp"
#include "dem/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dem {

struct NkDistribution {
  int k = 1;
  std::vector<long> counts;       // N_k(i) per prototype
  long num_test_samples = 0;
  int num_prototypes = 0;
};

/// Counts, for each prototype, how often it lands in the k nearest prototypes
/// of a test point. Ties break toward the lower prototype index.
NkDistribution nk_distribution(const Eigen::Ref<const Matrix>& test_points,
                               const Eigen::Ref<const Matrix>& prototypes, int k,
                               Distance dist);

/// Population skewness of a count vector: (sum (x - mean)^3 / l) / var^{3/2}.
/// Throws NumericError when the variance is zero.
Real skewness_of(const std::vector<Real>& values);

Real skewness(const NkDistribution& dist);

using EmbedFn = std::function<Matrix(const Matrix&)>;

struct DirectionReport {
  NkDistribution nk_s2v;
  NkDistribution nk_v2s;
  Real skew_s2v = 0.0;
  Real skew_v2s = 0.0;
};

/// Hubness of the two embedding directions. s2v_map takes semantic prototype
/// columns into the visual space (test features stay raw); v2s_map takes test
/// feature columns into the semantic space (prototypes stay raw).
DirectionReport direction_report(const Eigen::Ref<const Matrix>& test_features,
                                 const Eigen::Ref<const Matrix>& proto_semantic,
                                 const EmbedFn& s2v_map, const EmbedFn& v2s_map, int k,
                                 Distance dist);

/// CSV: `prototype_id,count` rows followed by `skewness,<value>`.
void write_nk_csv(const NkDistribution& dist, Real skew, const std::string& path);

}  // namespace dem
