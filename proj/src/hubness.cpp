#include "dem/hubness.hpp"

#include "dem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dem {

NkDistribution nk_distribution(const Eigen::Ref<const Matrix>& test_points,
                               const Eigen::Ref<const Matrix>& prototypes, int k,
                               Distance dist) {
  const Index num_protos = prototypes.cols();
  if (k < 1 || k > static_cast<int>(num_protos)) {
    throw DimensionError("nk_distribution: k out of range");
  }
  if (test_points.rows() != prototypes.rows()) {
    throw DimensionError("nk_distribution: dimension mismatch between points and prototypes");
  }
  NkDistribution out;
  out.k = k;
  out.num_prototypes = static_cast<int>(num_protos);
  out.num_test_samples = static_cast<long>(test_points.cols());
  out.counts.assign(static_cast<std::size_t>(num_protos), 0);

  std::vector<std::pair<Real, Index>> order(static_cast<std::size_t>(num_protos));
  for (Index j = 0; j < test_points.cols(); ++j) {
    for (Index i = 0; i < num_protos; ++i) {
      order[static_cast<std::size_t>(i)] = {distance(dist, test_points.col(j), prototypes.col(i)), i};
    }
    std::sort(order.begin(), order.end());
    for (int t = 0; t < k; ++t) {
      ++out.counts[static_cast<std::size_t>(order[static_cast<std::size_t>(t)].second)];
    }
  }
  return out;
}

Real skewness_of(const std::vector<Real>& values) {
  if (values.empty()) throw DimensionError("skewness: empty count vector");
  const Real l = static_cast<Real>(values.size());
  Real mean = 0.0;
  for (Real v : values) mean += v;
  mean /= l;
  Real var = 0.0, third = 0.0;
  for (Real v : values) {
    const Real d = v - mean;
    var += d * d;
    third += d * d * d;
  }
  var /= l;
  third /= l;
  if (var <= 0.0) {
    throw NumericError("skewness: degenerate distribution (zero variance)");
  }
  return third / std::pow(var, 1.5);
}

Real skewness(const NkDistribution& dist) {
  std::vector<Real> values(dist.counts.begin(), dist.counts.end());
  return skewness_of(values);
}

DirectionReport direction_report(const Eigen::Ref<const Matrix>& test_features,
                                 const Eigen::Ref<const Matrix>& proto_semantic,
                                 const EmbedFn& s2v_map, const EmbedFn& v2s_map, int k,
                                 Distance dist) {
  DirectionReport report;
  const Matrix proto_visual = s2v_map(proto_semantic);
  report.nk_s2v = nk_distribution(test_features, proto_visual, k, dist);
  report.skew_s2v = skewness(report.nk_s2v);

  const Matrix mapped_features = v2s_map(test_features);
  report.nk_v2s = nk_distribution(mapped_features, proto_semantic, k, dist);
  report.skew_v2s = skewness(report.nk_v2s);
  return report;
}

void write_nk_csv(const NkDistribution& dist, Real skew, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "prototype_id,count\n";
  for (std::size_t i = 0; i < dist.counts.size(); ++i) {
    out << i << "," << dist.counts[i] << "\n";
  }
  out << "skewness," << format_real(skew) << "\n";
}

}  // namespace dem
