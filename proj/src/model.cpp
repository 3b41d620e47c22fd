#include "dem/model.hpp"

#include "dem/linalg.hpp"
#include "dem/optim.hpp"
#include "dem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>

namespace dem {
namespace {

DenseLayer make_dense(int in_dim, int out_dim, bool use_bias, Activation act, Rng& rng) {
  DenseLayer layer;
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(in_dim));
  layer.weight = rng.uniform_matrix(out_dim, in_dim, -bound, bound);
  if (use_bias) layer.bias = Matrix::Zero(out_dim, 1);
  layer.activation = act;
  return layer;
}

std::vector<int> sorted_seen(const Dataset& ds) {
  return std::vector<int>(ds.seen.begin(), ds.seen.end());
}

// Trainable parameters in a fixed order: branch weights/biases, output
// weight/bias, then the text-encoder parameters.
std::vector<Matrix*> trainable_params(DemModel& model) {
  std::vector<Matrix*> params;
  for (auto& b : model.net.branches) {
    params.push_back(&b.weight);
    if (b.bias) params.push_back(&*b.bias);
  }
  if (model.net.output) {
    params.push_back(&model.net.output->weight);
    if (model.net.output->bias) params.push_back(&*model.net.output->bias);
  }
  if (model.text_encoder) {
    TextGradients dummy;
    for (Matrix* p : dummy.params_of(*model.text_encoder)) params.push_back(p);
  }
  return params;
}

std::vector<Matrix> collect_grads(const DemModel& model, const GradientSet& dense,
                                  const TextGradients* text) {
  std::vector<Matrix> grads;
  for (std::size_t b = 0; b < model.net.branches.size(); ++b) {
    grads.push_back(dense.branch_weight[b]);
    if (model.net.branches[b].bias) grads.push_back(dense.branch_bias[b]);
  }
  if (model.net.output) {
    grads.push_back(dense.output_weight);
    if (model.net.output->bias) grads.push_back(dense.output_bias);
  }
  if (text) {
    grads.push_back(text->d_embedding);
    for (int i = 0; i < 4; ++i) grads.push_back(text->d_w[i]);
    for (int i = 0; i < 4; ++i) grads.push_back(text->d_b[i]);
    for (int i = 4; i < 8; ++i) grads.push_back(text->d_w[i]);
    for (int i = 4; i < 8; ++i) grads.push_back(text->d_b[i]);
    grads.push_back(text->d_proj_forward);
    grads.push_back(text->d_proj_backward);
  }
  return grads;
}

}  // namespace

DemModel build_model(const ModelSpec& spec) {
  if (spec.visual_dim <= 0) throw ConfigError("build_model: visual_dim must be positive");
  if (spec.hidden <= 0) throw ConfigError("build_model: hidden size must be positive");
  DemModel model;
  model.variant = spec.variant;
  Rng rng(spec.seed);

  const bool text = spec.variant == Variant::kText;
  std::size_t num_linear = spec.modalities.size();
  if (spec.variant == Variant::kSingle && num_linear != 1) {
    throw ConfigError("build_model: single variant needs exactly one modality");
  }
  if (spec.variant == Variant::kFused && num_linear < 2 && !text) {
    throw ConfigError("build_model: fused variant needs at least two modalities");
  }
  if (text && spec.vocab_size < 2) {
    throw ConfigError("build_model: text variant needs a vocabulary");
  }

  const int fusion_out = spec.one_layer ? spec.visual_dim : spec.hidden;
  for (const auto& [name, dim] : spec.modalities) {
    if (dim <= 0) throw ConfigError("build_model: modality '" + name + "' has no dimension");
    model.net.branches.push_back(
        make_dense(dim, fusion_out, spec.use_bias, Activation::kIdentity, rng));
    model.modalities.push_back(name);
  }

  // f2 when modalities are fused, f1 otherwise.
  const std::size_t total_branches = num_linear + (text ? 1 : 0);
  model.net.fusion_activation =
      total_branches >= 2 ? Activation::kScaledTanh : Activation::kRelu;
  if (spec.one_layer) {
    model.net.fusion_activation =
        spec.output_relu ? model.net.fusion_activation : Activation::kIdentity;
  } else {
    model.net.output = make_dense(spec.hidden, spec.visual_dim, spec.use_bias,
                                  spec.output_relu ? Activation::kRelu : Activation::kIdentity,
                                  rng);
  }

  if (text) {
    model.text_encoder = make_bilstm_encoder(spec.vocab_size, spec.embed_dim,
                                             spec.lstm_hidden, fusion_out, spec.max_len, rng);
  }
  return model;
}

Matrix embed(const DemModel& model, const std::vector<Matrix>& semantic) {
  if (model.variant == Variant::kText && model.net.branches.empty()) {
    throw ConfigError("embed: text-variant prototypes go through embed_from_unit");
  }
  ForwardCache cache = forward(model.net, semantic);
  return cache.embedded;
}

Matrix embed(const DemModel& model, const Eigen::Ref<const Matrix>& semantic) {
  std::vector<Matrix> inputs;
  inputs.emplace_back(semantic);
  return embed(model, inputs);
}

Matrix embed_from_unit(const DemModel& model, const Eigen::Ref<const Matrix>& unit) {
  if (unit.rows() != model.hidden_dim()) {
    throw DimensionError("embed_from_unit: unit rows must equal the fusion size");
  }
  if (!model.net.output) return unit;
  Matrix pre = model.net.output->weight * unit;
  if (model.net.output->bias) pre.colwise() += model.net.output->bias->col(0);
  return apply_activation(model.net.output->activation, pre);
}

PrototypeSet make_prototypes(const DemModel& model, const Dataset& ds,
                             const std::vector<int>& classes) {
  if (classes.empty()) throw DimensionError("make_prototypes: empty class list");
  PrototypeSet protos;
  protos.class_ids = classes;
  if (model.variant == Variant::kText) {
    if (!model.text_encoder || !model.vocab) {
      throw ConfigError("make_prototypes: text model lacks encoder or vocabulary");
    }
    std::vector<std::vector<std::string>> per_class(classes.size());
    for (Index i = 0; i < ds.num_samples(); ++i) {
      for (std::size_t c = 0; c < classes.size(); ++c) {
        if (ds.labels[i] == classes[c]) {
          for (const auto& text : ds.descriptions[static_cast<std::size_t>(i)]) {
            per_class[c].push_back(text);
          }
        }
      }
    }
    Matrix unit = average_prototypes(*model.text_encoder, model.net.fusion_activation,
                                     *model.vocab, per_class);
    protos.semantic.push_back(unit);
    protos.embedded = embed_from_unit(model, unit);
    return protos;
  }
  std::vector<Matrix> inputs;
  for (const auto& modality : model.modalities) {
    inputs.push_back(prototype_matrix(ds, modality, classes));
  }
  protos.semantic = inputs;
  protos.embedded = embed(model, inputs);
  return protos;
}

Real distance(Distance kind, const Eigen::Ref<const Vector>& a,
              const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw DimensionError("distance: dimension mismatch");
  if (kind == Distance::kSqEuclidean) return (a - b).squaredNorm();
  const Real na = a.norm(), nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

int classify_columns(const Eigen::Ref<const Vector>& point,
                     const Eigen::Ref<const Matrix>& proto_columns,
                     const std::vector<int>& class_ids, Distance dist) {
  if (proto_columns.cols() == 0) throw DimensionError("classify: empty prototype set");
  if (static_cast<Index>(class_ids.size()) != proto_columns.cols()) {
    throw DimensionError("classify: one class id per prototype column required");
  }
  int best_id = class_ids[0];
  Real best = distance(dist, point, proto_columns.col(0));
  for (Index c = 1; c < proto_columns.cols(); ++c) {
    const Real d = distance(dist, point, proto_columns.col(c));
    if (d < best || (d == best && class_ids[static_cast<std::size_t>(c)] < best_id)) {
      best = d;
      best_id = class_ids[static_cast<std::size_t>(c)];
    }
  }
  return best_id;
}

int classify(const DemModel& model, const Eigen::Ref<const Vector>& feature,
             const PrototypeSet& protos, Distance dist) {
  if (feature.size() != model.visual_dim()) {
    throw DimensionError("classify: feature dimension mismatch");
  }
  return classify_columns(feature, protos.embedded, protos.class_ids, dist);
}

Real hit_at_k(const Eigen::Ref<const Matrix>& points, const std::vector<int>& labels,
              const Eigen::Ref<const Matrix>& proto_columns,
              const std::vector<int>& class_ids, int k, Distance dist) {
  const Index num_protos = proto_columns.cols();
  if (k < 1 || k > static_cast<int>(num_protos)) {
    throw DimensionError("hit_at_k: k out of range");
  }
  if (static_cast<Index>(labels.size()) != points.cols()) {
    throw DimensionError("hit_at_k: one label per point required");
  }
  if (points.cols() == 0) throw DimensionError("hit_at_k: no points");
  Index hits = 0;
  std::vector<std::pair<Real, int>> order(static_cast<std::size_t>(num_protos));
  for (Index i = 0; i < points.cols(); ++i) {
    for (Index c = 0; c < num_protos; ++c) {
      order[static_cast<std::size_t>(c)] = {
          distance(dist, points.col(i), proto_columns.col(c)),
          class_ids[static_cast<std::size_t>(c)]};
    }
    std::sort(order.begin(), order.end());
    for (int j = 0; j < k; ++j) {
      if (order[static_cast<std::size_t>(j)].second == labels[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<Real>(hits) / static_cast<Real>(points.cols());
}

namespace {

struct Batch {
  std::vector<Matrix> inputs;        // per linear branch
  Matrix visual;                     // targets / batch features
  std::vector<int> labels;           // hinge only
  std::vector<Index> sample_rows;    // dataset sample index per column (text)
};

// Shared minibatch loop. `assemble` builds the batch; `step_fn` runs
// forward/backward and returns the batch loss.
std::vector<Real> run_epochs(const TrainConfig& config, Index num_train,
                             const std::function<Real(const std::vector<Index>&, Rng&)>& step_fn) {
  std::vector<Real> history;
  Rng rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto perm = rng.permutation(static_cast<int>(num_train));
    Real epoch_loss = 0.0;
    Index covered = 0;
    for (Index start = 0; start < num_train; start += config.batch_size) {
      const Index stop = std::min<Index>(start + config.batch_size, num_train);
      std::vector<Index> batch;
      batch.reserve(static_cast<std::size_t>(stop - start));
      for (Index i = start; i < stop; ++i) {
        batch.push_back(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
      }
      const Real loss = step_fn(batch, rng);
      epoch_loss += loss * static_cast<Real>(batch.size());
      covered += static_cast<Index>(batch.size());
    }
    history.push_back(epoch_loss / static_cast<Real>(covered));
  }
  return history;
}

}  // namespace

std::vector<Real> train(DemModel& model, const Dataset& ds, const TrainConfig& config) {
  const auto train_samples = seen_sample_indices(ds);
  if (train_samples.empty()) throw DimensionError("train: dataset has no seen-class samples");
  if (ds.visual_dim() != model.visual_dim()) {
    throw DimensionError("train: feature dimension " + std::to_string(ds.visual_dim()) +
                         " does not match model output " + std::to_string(model.visual_dim()));
  }
  if (config.batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (config.epochs < 0) throw ConfigError("train: epochs must be nonnegative");

  const bool text = model.variant == Variant::kText;
  if (text && !ds.has_descriptions()) {
    throw ConfigError("train: text variant needs descriptions.tsv");
  }

  // Static per-sample inputs for the linear modalities.
  std::vector<Matrix> full_inputs;
  for (const auto& modality : model.modalities) {
    full_inputs.push_back(semantic_for_samples(ds, modality, train_samples));
  }
  const Matrix full_visual = features_of(ds, train_samples);

  // Hinge training embeds the seen-class prototypes instead of per-sample vectors.
  const std::vector<int> seen_classes = sorted_seen(ds);
  std::map<int, int> class_to_col;
  for (std::size_t c = 0; c < seen_classes.size(); ++c) {
    class_to_col[seen_classes[c]] = static_cast<int>(c);
  }
  std::vector<Matrix> proto_inputs;
  if (config.loss == LossKind::kHinge && !text) {
    for (const auto& modality : model.modalities) {
      proto_inputs.push_back(prototype_matrix(ds, modality, seen_classes));
    }
  }

  std::unique_ptr<AdamState> adam;
  std::unique_ptr<RmsPropState> rmsprop;
  if (config.optimizer == OptimizerKind::kAdam) {
    adam = std::make_unique<AdamState>(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
  } else {
    rmsprop = std::make_unique<RmsPropState>(RmsPropConfig{config.learning_rate, 0.9, 1e-8});
  }
  const auto params = trainable_params(model);

  auto apply_update = [&](std::vector<Matrix>& grads) {
    if (config.clip_norm) {
      std::vector<Matrix*> gptrs;
      for (auto& g : grads) gptrs.push_back(&g);
      clip_gradients(gptrs, *config.clip_norm);
    }
    std::vector<const Matrix*> gptrs;
    for (const auto& g : grads) gptrs.push_back(&g);
    if (adam) {
      adam->step(params, gptrs);
    } else {
      rmsprop->step(params, gptrs);
    }
  };

  auto step_linear = [&](const std::vector<Index>& batch, Rng&) -> Real {
    Matrix visual(full_visual.rows(), static_cast<Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      visual.col(static_cast<Index>(i)) = full_visual.col(batch[i]);
    }
    LossSpec spec;
    spec.lambda = config.lambda;
    ForwardCache cache;
    if (config.loss == LossKind::kLeastSquare) {
      std::vector<Matrix> inputs;
      for (const auto& full : full_inputs) {
        Matrix in(full.rows(), static_cast<Index>(batch.size()));
        for (std::size_t i = 0; i < batch.size(); ++i) {
          in.col(static_cast<Index>(i)) = full.col(batch[i]);
        }
        inputs.push_back(std::move(in));
      }
      cache = forward(model.net, std::move(inputs));
    } else {
      spec.kind = LossKind::kHinge;
      spec.margin = config.margin;
      spec.labels.reserve(batch.size());
      for (const Index s : batch) {
        spec.labels.push_back(class_to_col.at(ds.labels[train_samples[static_cast<std::size_t>(s)]]));
      }
      cache = forward(model.net, proto_inputs);
    }
    const Real loss = loss_value(model.net, cache, visual, spec);
    GradientSet dense = backward(model.net, cache, visual, spec);
    auto grads = collect_grads(model, dense, nullptr);
    apply_update(grads);
    return loss;
  };

  auto step_text = [&](const std::vector<Index>& batch, Rng& rng) -> Real {
    BiLstmEncoder& enc = *model.text_encoder;
    Matrix visual(full_visual.rows(), static_cast<Index>(batch.size()));
    std::vector<EncodeCache> seq_caches(batch.size());
    Matrix text_pre(model.hidden_dim(), static_cast<Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Index sample = train_samples[static_cast<std::size_t>(batch[i])];
      visual.col(static_cast<Index>(i)) = full_visual.col(batch[i]);
      const auto& texts = ds.descriptions[static_cast<std::size_t>(sample)];
      if (texts.empty()) {
        throw ConfigError("train: sample " + std::to_string(sample) + " has no description");
      }
      const auto& text_line = texts[rng.below(texts.size())];
      seq_caches[i] = bilstm_forward(enc, tokenize_pad(text_line, *model.vocab, enc.max_len));
      text_pre.col(static_cast<Index>(i)) = seq_caches[i].unit_pre;
    }
    std::vector<Matrix> inputs;
    for (const auto& full : full_inputs) {
      Matrix in(full.rows(), static_cast<Index>(batch.size()));
      for (std::size_t i = 0; i < batch.size(); ++i) {
        in.col(static_cast<Index>(i)) = full.col(batch[i]);
      }
      inputs.push_back(std::move(in));
    }
    LossSpec spec;
    spec.lambda = config.lambda;
    ForwardCache cache = forward(model.net, std::move(inputs), &text_pre);
    Real loss = loss_value(model.net, cache, visual, spec);
    GradientSet dense = backward(model.net, cache, visual, spec);

    TextGradients text_grads;
    text_grads.init_like(enc);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      TextGradients g = bilstm_backward(enc, seq_caches[i],
                                        dense.fusion_input_grad.col(static_cast<Index>(i)));
      text_grads.accumulate(g);
    }
    // The lambda penalty also covers the encoder weight matrices.
    TextGradients dummy;
    for (Matrix* w : dummy.params_of(enc)) {
      loss += config.lambda * w->squaredNorm();
    }
    std::vector<Matrix*> text_params = dummy.params_of(enc);
    std::vector<Matrix*> text_grad_slots = {
        &text_grads.d_embedding,
        &text_grads.d_w[0], &text_grads.d_w[1], &text_grads.d_w[2], &text_grads.d_w[3],
        &text_grads.d_b[0], &text_grads.d_b[1], &text_grads.d_b[2], &text_grads.d_b[3],
        &text_grads.d_w[4], &text_grads.d_w[5], &text_grads.d_w[6], &text_grads.d_w[7],
        &text_grads.d_b[4], &text_grads.d_b[5], &text_grads.d_b[6], &text_grads.d_b[7],
        &text_grads.d_proj_forward, &text_grads.d_proj_backward};
    for (std::size_t i = 0; i < text_params.size(); ++i) {
      *text_grad_slots[i] += 2.0 * config.lambda * *text_params[i];
    }
    auto grads = collect_grads(model, dense, &text_grads);
    apply_update(grads);
    return loss;
  };

  const Index n = static_cast<Index>(train_samples.size());
  if (text) {
    return run_epochs(config, n, step_text);
  }
  return run_epochs(config, n, step_linear);
}

DemModel train_reverse_direction(const Dataset& ds, const TrainConfig& config,
                                 const std::string& modality, int hidden, bool use_bias,
                                 bool output_relu, std::vector<Real>* history) {
  // Same two-FC machinery with the branches swapped: the "modality" of the
  // encoder is the visual feature space and the embedding target is the
  // semantic space.
  const Matrix& table = ds.table(modality);
  ModelSpec spec;
  spec.variant = Variant::kSingle;
  spec.modalities = {{"visual", static_cast<int>(ds.visual_dim())}};
  spec.hidden = hidden;
  spec.visual_dim = static_cast<int>(table.rows());   // output = semantic dim
  spec.use_bias = use_bias;
  spec.output_relu = output_relu;
  spec.seed = config.seed;
  DemModel model = build_model(spec);

  const auto train_samples = seen_sample_indices(ds);
  if (train_samples.empty()) throw DimensionError("train_reverse_direction: no seen samples");

  const Matrix inputs_full = features_of(ds, train_samples);
  Matrix targets_full(table.rows(), static_cast<Index>(train_samples.size()));
  for (std::size_t i = 0; i < train_samples.size(); ++i) {
    targets_full.col(static_cast<Index>(i)) =
        table.col(ds.class_column(ds.labels[train_samples[i]]));
  }

  std::unique_ptr<AdamState> adam;
  std::unique_ptr<RmsPropState> rmsprop;
  if (config.optimizer == OptimizerKind::kAdam) {
    adam = std::make_unique<AdamState>(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
  } else {
    rmsprop = std::make_unique<RmsPropState>(RmsPropConfig{config.learning_rate, 0.9, 1e-8});
  }
  const auto params = trainable_params(model);

  auto step_fn = [&](const std::vector<Index>& batch, Rng&) -> Real {
    Matrix in(inputs_full.rows(), static_cast<Index>(batch.size()));
    Matrix tgt(targets_full.rows(), static_cast<Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      in.col(static_cast<Index>(i)) = inputs_full.col(batch[i]);
      tgt.col(static_cast<Index>(i)) = targets_full.col(batch[i]);
    }
    LossSpec spec;
    spec.lambda = config.lambda;
    std::vector<Matrix> inputs;
    inputs.push_back(std::move(in));
    ForwardCache cache = forward(model.net, std::move(inputs));
    const Real loss = loss_value(model.net, cache, tgt, spec);
    GradientSet dense = backward(model.net, cache, tgt, spec);
    auto grads = collect_grads(model, dense, nullptr);
    if (config.clip_norm) {
      std::vector<Matrix*> gptrs;
      for (auto& g : grads) gptrs.push_back(&g);
      clip_gradients(gptrs, *config.clip_norm);
    }
    std::vector<const Matrix*> gptrs;
    for (const auto& g : grads) gptrs.push_back(&g);
    if (adam) {
      adam->step(params, gptrs);
    } else {
      rmsprop->step(params, gptrs);
    }
    return loss;
  };

  auto hist = run_epochs(config, static_cast<Index>(train_samples.size()), step_fn);
  if (history) *history = std::move(hist);
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization: magic DEMM, u32 version, payload, trailing
// FNV-1a-64 checksum of the payload. Matrices are f64 little-endian
// row-major with u32 rows/cols headers.

namespace {

constexpr char kModelMagic[4] = {'D', 'E', 'M', 'M'};
constexpr std::uint32_t kModelVersion = 1;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_matrix(std::string& out, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const Real v = m(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      put_u64(out, bits);
    }
  }
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;
  const std::string& file;

  void need(std::size_t n) {
    if (pos + n > bytes.size()) throw IoError(file + ": truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes[pos++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  }
  Matrix matrix() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    Matrix m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) {
        const std::uint64_t bits = u64();
        Real v;
        std::memcpy(&v, &bits, sizeof(v));
        m(i, j) = v;
      }
    }
    return m;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_dense(std::string& out, const DenseLayer& layer) {
  put_matrix(out, layer.weight);
  put_u8(out, layer.bias ? 1 : 0);
  if (layer.bias) put_matrix(out, *layer.bias);
  put_u8(out, static_cast<std::uint8_t>(layer.activation));
}

DenseLayer read_dense(Reader& r) {
  DenseLayer layer;
  layer.weight = r.matrix();
  if (r.u8()) layer.bias = r.matrix();
  layer.activation = static_cast<Activation>(r.u8());
  return layer;
}

}  // namespace

void save_checkpoint(const DemModel& model, const std::string& path) {
  std::string payload;
  put_u8(payload, static_cast<std::uint8_t>(model.variant));
  put_u8(payload, static_cast<std::uint8_t>(model.net.fusion_activation));
  put_u32(payload, static_cast<std::uint32_t>(model.net.branches.size()));
  for (std::size_t b = 0; b < model.net.branches.size(); ++b) {
    const std::string& name = model.modalities[b];
    put_u16(payload, static_cast<std::uint16_t>(name.size()));
    payload += name;
    put_dense(payload, model.net.branches[b]);
  }
  put_u8(payload, model.net.output ? 1 : 0);
  if (model.net.output) put_dense(payload, *model.net.output);
  put_u8(payload, model.text_encoder ? 1 : 0);
  if (model.text_encoder) {
    const BiLstmEncoder& enc = *model.text_encoder;
    put_u32(payload, static_cast<std::uint32_t>(enc.max_len));
    put_matrix(payload, enc.embedding);
    const LstmCell* cells[2] = {&enc.forward_cell, &enc.backward_cell};
    for (const LstmCell* cell : cells) {
      put_matrix(payload, cell->w_input);
      put_matrix(payload, cell->w_forget);
      put_matrix(payload, cell->w_output);
      put_matrix(payload, cell->w_cell);
      put_matrix(payload, cell->b_input);
      put_matrix(payload, cell->b_forget);
      put_matrix(payload, cell->b_output);
      put_matrix(payload, cell->b_cell);
    }
    put_matrix(payload, enc.proj_forward);
    put_matrix(payload, enc.proj_backward);
    const Vocabulary& vocab = *model.vocab;
    put_u32(payload, static_cast<std::uint32_t>(vocab.size()));
    for (int i = 0; i < vocab.size(); ++i) {
      const std::string& token = vocab.token(i);
      put_u16(payload, static_cast<std::uint16_t>(token.size()));
      payload += token;
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(kModelMagic, 4);
  std::string header;
  put_u32(header, kModelVersion);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::string tail;
  put_u64(tail, fnv1a(payload));
  out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
}

DemModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw IoError(path + ": truncated checkpoint");
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw IoError(path + ": bad magic (expected DEMM)");
  }
  Reader header{bytes, 4, path};
  const std::uint32_t version = header.u32();
  if (version != kModelVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::string payload = bytes.substr(8, bytes.size() - 16);
  Reader tail{bytes, bytes.size() - 8, path};
  const std::uint64_t stored = tail.u64();
  const std::uint64_t actual = fnv1a(payload);
  if (stored != actual) {
    throw IoError(path + ": checksum mismatch (stored " + std::to_string(stored) +
                  ", computed " + std::to_string(actual) + ")");
  }

  Reader r{payload, 0, path};
  DemModel model;
  model.variant = static_cast<Variant>(r.u8());
  model.net.fusion_activation = static_cast<Activation>(r.u8());
  const std::uint32_t num_branches = r.u32();
  for (std::uint32_t b = 0; b < num_branches; ++b) {
    const std::uint16_t len = r.u16();
    model.modalities.push_back(r.str(len));
    model.net.branches.push_back(read_dense(r));
  }
  if (r.u8()) model.net.output = read_dense(r);
  if (r.u8()) {
    BiLstmEncoder enc;
    enc.max_len = static_cast<int>(r.u32());
    enc.embedding = r.matrix();
    LstmCell* cells[2] = {&enc.forward_cell, &enc.backward_cell};
    for (LstmCell* cell : cells) {
      cell->w_input = r.matrix();
      cell->w_forget = r.matrix();
      cell->w_output = r.matrix();
      cell->w_cell = r.matrix();
      cell->b_input = r.matrix();
      cell->b_forget = r.matrix();
      cell->b_output = r.matrix();
      cell->b_cell = r.matrix();
    }
    enc.proj_forward = r.matrix();
    enc.proj_backward = r.matrix();
    model.text_encoder = std::move(enc);
    Vocabulary vocab;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint16_t len = r.u16();
      const std::string token = r.str(len);
      if (i >= 2) vocab.add(token);
    }
    model.vocab = std::move(vocab);
  }
  if (r.pos != payload.size()) {
    throw IoError(path + ": trailing bytes in checkpoint payload");
  }
  return model;
}

}  // namespace dem
