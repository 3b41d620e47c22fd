#pragma once

#include "dem/types.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace dem {

// Columns-as-samples throughout: features is D x N, semantic tables are
// L_m x num_classes with one column per class (column order = sorted ids).
struct Dataset {
  Matrix features;                          // D x N
  std::vector<int> labels;                  // class id per sample (N)
  std::vector<int> class_ids;               // sorted; column order of the tables
  std::map<std::string, Matrix> semantic;   // modality -> L_m x num_classes
  std::set<int> seen;
  std::set<int> unseen;
  // Per-sample description lists (a sample may carry several); empty when the
  // dataset has no descriptions file.
  std::vector<std::vector<std::string>> descriptions;

  Index visual_dim() const { return features.rows(); }
  Index num_samples() const { return features.cols(); }
  int class_column(int class_id) const;
  const Matrix& table(const std::string& modality) const;
  bool has_descriptions() const { return !descriptions.empty(); }
};

/// Validates the cross-file invariants (split disjointness, label coverage,
/// class vectors present for every label, counts consistent). Throws IoError
/// with the offending file/record named.
void validate_dataset(const Dataset& ds, const std::string& origin);

Dataset load_dataset(const std::string& directory);

/// Writes the dataset directory. binary_features selects features.bin over
/// features.csv. Output is byte-deterministic.
void save_dataset(const Dataset& ds, const std::string& directory,
                  bool binary_features = true);

/// Semantic vectors for the given sample indices (one column each).
Matrix semantic_for_samples(const Dataset& ds, const std::string& modality,
                            const std::vector<Index>& samples);

/// L_m x k prototype matrix for the listed classes.
Matrix prototype_matrix(const Dataset& ds, const std::string& modality,
                        const std::vector<int>& classes);

std::vector<Index> seen_sample_indices(const Dataset& ds);
std::vector<Index> unseen_sample_indices(const Dataset& ds);
Matrix features_of(const Dataset& ds, const std::vector<Index>& samples);

struct ValidationSplit {
  Dataset train_part;   // samples of the retained seen classes
  Dataset val_part;     // samples of the held-out classes (pseudo-unseen)
};

/// Class-level split of the seen classes: round(fraction * |seen|) classes
/// (at least 1) become pseudo-unseen validation classes.
ValidationSplit make_validation_split(const Dataset& ds, Real fraction,
                                      std::uint64_t seed);

struct SynthSpec {
  int visual_dim = 100;        // D
  int semantic_dim = 20;       // L
  int num_seen = 30;
  int num_unseen = 10;
  int samples_per_class = 50;
  Real noise_sigma = 0.3;
  int depth = 2;               // tanh stages in the generator's nonlinear path
  std::uint64_t seed = 1;

  // Generator internals. The scaffold (maps, offsets) is drawn from its own
  // seed so that different sampling seeds share one feature-space geometry,
  // the way benchmark features stay fixed across experimental reruns.
  std::uint64_t scaffold_seed = 4000;
  int linear_rank = 5;
  Real bump_scale = 2.8;
  Real bump_width = 0.5;
  Real offset_scale = 0.4;
  Real feature_scale = 0.22;
};

struct SynthResult {
  Dataset dataset;
  std::vector<Matrix> generator_weights;   // recorded for diagnostics
};

SynthResult synth_generate(const SynthSpec& spec);

}  // namespace dem
