#pragma once

#include "dem/data.hpp"
#include "dem/nn.hpp"
#include "dem/text.hpp"
#include "dem/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dem {

enum class Variant { kSingle, kFused, kText };
enum class Distance { kSqEuclidean, kCosine };
enum class OptimizerKind { kAdam, kRmsProp };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  Real learning_rate = 1e-4;
  Real lambda = 1e-3;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::kLeastSquare;
  Real margin = 0.1;
  std::optional<Real> clip_norm;   // global-norm clip; the text variant defaults to 5
};

struct ModelSpec {
  Variant variant = Variant::kSingle;
  std::vector<std::pair<std::string, int>> modalities;   // (name, input dim) per linear branch
  int hidden = 300;                                      // M
  int visual_dim = 0;                                    // D
  bool use_bias = false;
  bool output_relu = true;    // outer activation on the embedding output
  bool one_layer = false;     // no output layer; the fusion layer maps straight to D
  std::uint64_t seed = 1;

  // Text-variant sizes.
  int vocab_size = 0;
  int embed_dim = 512;
  int lstm_hidden = 512;
  int max_len = 30;
};

struct DemModel {
  Variant variant = Variant::kSingle;
  FeedForwardNet net;                        // linear branches + optional output layer
  std::vector<std::string> modalities;       // aligned with net.branches
  std::optional<BiLstmEncoder> text_encoder; // present iff variant == kText
  std::optional<Vocabulary> vocab;

  Index visual_dim() const { return net.out_dim(); }
  Index hidden_dim() const {
    const Index m = net.fusion_dim();
    if (m > 0) return m;
    return text_encoder ? text_encoder->unit_dim() : 0;
  }
};

/// Uniform +-1/sqrt(in_dim) initialisation from the seeded RNG.
DemModel build_model(const ModelSpec& spec);

/// Embeds semantic columns into the visual space. One input matrix per linear
/// modality, in the model's branch order.
Matrix embed(const DemModel& model, const std::vector<Matrix>& semantic);

/// Single-modality convenience overload.
Matrix embed(const DemModel& model, const Eigen::Ref<const Matrix>& semantic);

/// Embeds unit-space columns (e.g. averaged text encodings) through the
/// output layer only.
Matrix embed_from_unit(const DemModel& model, const Eigen::Ref<const Matrix>& unit);

struct PrototypeSet {
  std::vector<int> class_ids;
  std::vector<Matrix> semantic;   // per modality, L_m x C (unit-space for text)
  Matrix embedded;                // D x C
};

/// Prototypes for the listed classes, embedded with the model. The text
/// variant averages the per-class description encodings.
PrototypeSet make_prototypes(const DemModel& model, const Dataset& ds,
                             const std::vector<int>& classes);

Real distance(Distance kind, const Eigen::Ref<const Vector>& a,
              const Eigen::Ref<const Vector>& b);

/// Nearest prototype; ties broken by lowest class id.
int classify(const DemModel& model, const Eigen::Ref<const Vector>& feature,
             const PrototypeSet& protos, Distance dist);

/// Classification against raw prototype columns (used by the reverse
/// direction and the ridge baselines).
int classify_columns(const Eigen::Ref<const Vector>& point,
                     const Eigen::Ref<const Matrix>& proto_columns,
                     const std::vector<int>& class_ids, Distance dist);

/// Fraction of samples whose true class is among the k nearest prototypes.
Real hit_at_k(const Eigen::Ref<const Matrix>& points, const std::vector<int>& labels,
              const Eigen::Ref<const Matrix>& proto_columns,
              const std::vector<int>& class_ids, int k, Distance dist);

/// Minibatch training on the seen split; returns per-epoch mean loss.
std::vector<Real> train(DemModel& model, const Dataset& ds, const TrainConfig& config);

/// Same machinery with the branches swapped: visual features map to the
/// semantic space of `modality`.
DemModel train_reverse_direction(const Dataset& ds, const TrainConfig& config,
                                 const std::string& modality, int hidden, bool use_bias,
                                 bool output_relu, std::vector<Real>* history = nullptr);

void save_checkpoint(const DemModel& model, const std::string& path);
DemModel load_checkpoint(const std::string& path);

}  // namespace dem
