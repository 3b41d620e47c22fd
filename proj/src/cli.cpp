#include "dem/cli.hpp"

#include "dem/hubness.hpp"
#include "dem/linalg.hpp"
#include "dem/ridge.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace dem {
namespace {

const std::vector<Real> kTrainLambdaGrid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
const std::vector<Real> kRidgeLambdaGrid = {1e-3, 1e-2, 1e-1, 1.0, 10.0};

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

Real parse_real_value(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const Real v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

int parse_int_value(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  return out;
}

bool is_text_config(const RunConfig& config) {
  return std::find(config.modalities.begin(), config.modalities.end(), "description") !=
         config.modalities.end();
}

OptimizerKind optimizer_for(const RunConfig& config, bool text) {
  std::string name = config.optimizer;
  if (name.empty()) name = text ? "rmsprop" : "adam";
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "rmsprop") return OptimizerKind::kRmsProp;
  throw ConfigError("unknown optimizer '" + name + "'");
}

TrainConfig make_train_config(const RunConfig& config, Real lambda, bool text) {
  TrainConfig tc;
  tc.optimizer = optimizer_for(config, text);
  tc.learning_rate = config.learning_rate;
  tc.lambda = lambda;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch;
  tc.seed = config.seed;
  tc.loss = config.loss == "hinge" ? LossKind::kHinge : LossKind::kLeastSquare;
  tc.margin = config.margin;
  tc.clip_norm = config.clip_norm;
  if (text && !tc.clip_norm) tc.clip_norm = 5.0;
  return tc;
}

std::vector<std::string> linear_modalities(const RunConfig& config) {
  std::vector<std::string> out;
  for (const auto& m : config.modalities) {
    if (m != "description") out.push_back(m);
  }
  return out;
}

ModelSpec make_model_spec(const Dataset& ds, const RunConfig& config,
                          const Vocabulary* vocab) {
  ModelSpec spec;
  const bool text = is_text_config(config);
  const auto linear = linear_modalities(config);
  if (text) {
    spec.variant = Variant::kText;
    if (!vocab) throw ConfigError("text variant requires a vocabulary");
    spec.vocab_size = vocab->size();
    spec.embed_dim = config.embed_dim;
    spec.lstm_hidden = config.lstm_hidden;
    spec.max_len = config.max_len;
  } else if (linear.size() >= 2) {
    spec.variant = Variant::kFused;
  } else {
    spec.variant = Variant::kSingle;
  }
  for (const auto& name : linear) {
    spec.modalities.emplace_back(name, static_cast<int>(ds.table(name).rows()));
  }
  spec.hidden = config.hidden;
  spec.visual_dim = static_cast<int>(ds.visual_dim());
  spec.use_bias = config.use_bias;
  spec.output_relu = config.output_relu;
  spec.seed = config.seed;
  return spec;
}

Vocabulary build_train_vocabulary(const Dataset& ds) {
  std::vector<std::string> texts;
  for (const Index i : seen_sample_indices(ds)) {
    for (const auto& text : ds.descriptions[static_cast<std::size_t>(i)]) {
      texts.push_back(text);
    }
  }
  return Vocabulary::build(texts);
}

// Unseen-split evaluation of a trained model (either direction).
std::pair<Real, Real> evaluate_unseen(const DemModel& model, const Dataset& ds,
                                      const RunConfig& config) {
  const Distance dist = parse_distance(config.distance);
  const auto test_samples = unseen_sample_indices(ds);
  if (test_samples.empty()) throw DimensionError("evaluation: no unseen samples");
  const auto classes = sorted_unseen_classes(ds);
  const Matrix test_features = features_of(ds, test_samples);
  std::vector<int> labels;
  labels.reserve(test_samples.size());
  for (const Index s : test_samples) labels.push_back(ds.labels[s]);

  Matrix points, protos;
  if (config.direction == "v2s") {
    points = embed(model, test_features);
    protos = prototype_matrix(ds, linear_modalities(config).front(), classes);
  } else {
    points = test_features;
    protos = make_prototypes(model, ds, classes).embedded;
  }
  const int k = std::min<int>(config.k, static_cast<int>(classes.size()));
  const Real hit1 = hit_at_k(points, labels, protos, classes, 1, dist);
  const Real hitk = hit_at_k(points, labels, protos, classes, k, dist);
  return {hit1, hitk};
}

DemModel train_once(const Dataset& ds, const RunConfig& config, Real lambda,
                    std::vector<Real>* history) {
  const bool text = is_text_config(config);
  const TrainConfig tc = make_train_config(config, lambda, text);
  if (config.direction == "v2s") {
    if (text) throw ConfigError("v2s direction is not available for the text variant");
    return train_reverse_direction(ds, tc, linear_modalities(config).front(), config.hidden,
                                   config.use_bias, config.output_relu, history);
  }
  std::optional<Vocabulary> vocab;
  if (text) vocab = build_train_vocabulary(ds);
  DemModel model = build_model(make_model_spec(ds, config, vocab ? &*vocab : nullptr));
  if (vocab) model.vocab = std::move(vocab);
  auto hist = train(model, ds, tc);
  if (history) *history = std::move(hist);
  return model;
}

Real validation_accuracy(const Dataset& ds, const RunConfig& config, Real lambda,
                         std::uint64_t split_seed) {
  const ValidationSplit split = make_validation_split(ds, config.val_fraction, split_seed);
  RunConfig sub = config;
  sub.lambda = lambda;
  DemModel model = train_once(split.train_part, sub, lambda, nullptr);
  RunConfig eval_cfg = sub;
  const auto [hit1, hitk] = evaluate_unseen(model, split.val_part, eval_cfg);
  (void)hitk;
  return hit1;
}

}  // namespace

Distance parse_distance(const std::string& name) {
  if (name == "sqeuclidean") return Distance::kSqEuclidean;
  if (name == "cosine") return Distance::kCosine;
  throw ConfigError("unknown distance '" + name + "'");
}

std::vector<int> sorted_unseen_classes(const Dataset& ds) {
  return std::vector<int>(ds.unseen.begin(), ds.unseen.end());
}

void apply_key_value(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "data") config.data_dir = value;
  else if (key == "out") config.out_dir = value;
  else if (key == "checkpoint") config.checkpoint = value;
  else if (key == "checkpoint_v2s") config.checkpoint_v2s = value;
  else if (key == "modality") config.modalities = split_list(value);
  else if (key == "direction") {
    if (value != "s2v" && value != "v2s") throw ConfigError("direction must be s2v or v2s");
    config.direction = value;
  } else if (key == "loss") {
    if (value != "ls" && value != "hinge") throw ConfigError("loss must be ls or hinge");
    config.loss = value;
  } else if (key == "optimizer") config.optimizer = value;
  else if (key == "distance") config.distance = value;
  else if (key == "lr") config.learning_rate = parse_real_value(value, key);
  else if (key == "lambda") config.lambda = parse_real_value(value, key);
  else if (key == "epochs") config.epochs = parse_int_value(value, key);
  else if (key == "batch") config.batch = parse_int_value(value, key);
  else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_int_value(value, key));
  else if (key == "k") config.k = parse_int_value(value, key);
  else if (key == "hidden") config.hidden = parse_int_value(value, key);
  else if (key == "bias") config.use_bias = parse_bool(value, key);
  else if (key == "output_relu") config.output_relu = parse_bool(value, key);
  else if (key == "clip") config.clip_norm = parse_real_value(value, key);
  else if (key == "margin") config.margin = parse_real_value(value, key);
  else if (key == "val_fraction") config.val_fraction = parse_real_value(value, key);
  else if (key == "val_repeats") config.val_repeats = parse_int_value(value, key);
  else if (key == "max_len") config.max_len = parse_int_value(value, key);
  else if (key == "embed_dim") config.embed_dim = parse_int_value(value, key);
  else if (key == "lstm_hidden") config.lstm_hidden = parse_int_value(value, key);
  else if (key == "synth_visual_dim") config.synth_visual_dim = parse_int_value(value, key);
  else if (key == "synth_semantic_dim") config.synth_semantic_dim = parse_int_value(value, key);
  else if (key == "synth_seen") config.synth_seen = parse_int_value(value, key);
  else if (key == "synth_unseen") config.synth_unseen = parse_int_value(value, key);
  else if (key == "synth_per_class") config.synth_per_class = parse_int_value(value, key);
  else if (key == "synth_noise") config.synth_noise = parse_real_value(value, key);
  else if (key == "synth_depth") config.synth_depth = parse_int_value(value, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    apply_key_value(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

std::string describe_config(const RunConfig& config) {
  std::ostringstream out;
  const char* names[] = {"train", "eval", "baseline", "analyze-hubness", "synth",
                         "export-embeddings"};
  out << "command=" << names[static_cast<int>(config.command)] << "\n";
  out << "data=" << config.data_dir << "\n";
  out << "out=" << config.out_dir << "\n";
  out << "modality=";
  for (std::size_t i = 0; i < config.modalities.size(); ++i) {
    if (i) out << ",";
    out << config.modalities[i];
  }
  out << "\n";
  out << "direction=" << config.direction << "\n";
  out << "loss=" << config.loss << "\n";
  out << "optimizer=" << (config.optimizer.empty() ? std::string("(variant default)") : config.optimizer)
      << "\n";
  out << "distance=" << config.distance << "\n";
  out << "lr=" << format_real(config.learning_rate) << "\n";
  out << "lambda=" << (config.lambda ? format_real(*config.lambda) : std::string("(grid search)"))
      << "\n";
  out << "epochs=" << config.epochs << "\n";
  out << "batch=" << config.batch << "\n";
  out << "seed=" << config.seed << "\n";
  out << "k=" << config.k << "\n";
  out << "hidden=" << config.hidden << "\n";
  out << "bias=" << (config.use_bias ? "true" : "false") << "\n";
  out << "output_relu=" << (config.output_relu ? "true" : "false") << "\n";
  out << "clip=" << (config.clip_norm ? format_real(*config.clip_norm) : std::string("none"))
      << "\n";
  out << "margin=" << format_real(config.margin) << "\n";
  return out.str();
}

TrainOutcome train_pipeline(const Dataset& ds, const RunConfig& config) {
  TrainOutcome outcome;
  Real lambda;
  if (config.lambda) {
    lambda = *config.lambda;
    std::cout << "lambda=" << format_real(lambda) << " given explicitly; skipping grid search\n";
  } else {
    outcome.grid_searched = true;
    Real best_acc = -1.0;
    Real best_lambda = kTrainLambdaGrid.front();
    for (const Real cand : kTrainLambdaGrid) {
      Real acc = 0.0;
      for (int rep = 0; rep < config.val_repeats; ++rep) {
        acc += validation_accuracy(ds, config, cand,
                                   config.seed + static_cast<std::uint64_t>(rep) * 101);
      }
      acc /= static_cast<Real>(config.val_repeats);
      std::cout << "grid lambda=" << format_real(cand) << " val_hit1=" << format_real(acc)
                << "\n";
      if (acc > best_acc) {
        best_acc = acc;
        best_lambda = cand;
      }
    }
    lambda = best_lambda;
    std::cout << "grid winner lambda=" << format_real(lambda) << "\n";
  }
  outcome.lambda_used = lambda;
  outcome.model = train_once(ds, config, lambda, &outcome.history);
  const auto [hit1, hitk] = evaluate_unseen(outcome.model, ds, config);
  outcome.hit1 = hit1;
  outcome.hitk = hitk;
  return outcome;
}

BaselineOutcome baseline_pipeline(const Dataset& ds, const RunConfig& config) {
  const Distance dist = parse_distance(config.distance);
  const std::string modality = linear_modalities(config).front();
  const auto train_samples = seen_sample_indices(ds);
  const auto test_samples = unseen_sample_indices(ds);
  if (train_samples.empty() || test_samples.empty()) {
    throw DimensionError("baseline: dataset needs both seen and unseen samples");
  }
  const Matrix semantic_train = semantic_for_samples(ds, modality, train_samples);
  const Matrix visual_train = features_of(ds, train_samples);
  const Matrix test_features = features_of(ds, test_samples);
  const auto classes = sorted_unseen_classes(ds);
  const Matrix protos = prototype_matrix(ds, modality, classes);
  std::vector<int> labels;
  for (const Index s : test_samples) labels.push_back(ds.labels[s]);

  auto pick_lambda = [&](bool s2v) -> Real {
    if (config.lambda) return *config.lambda;
    Real best_acc = -1.0, best_lambda = kRidgeLambdaGrid.front();
    const ValidationSplit split = make_validation_split(ds, config.val_fraction, config.seed);
    const auto tr = seen_sample_indices(split.train_part);
    const auto va = unseen_sample_indices(split.val_part);
    const Matrix a_tr = semantic_for_samples(split.train_part, modality, tr);
    const Matrix b_tr = features_of(split.train_part, tr);
    const Matrix va_feat = features_of(split.val_part, va);
    const std::vector<int> val_classes = sorted_unseen_classes(split.val_part);
    const Matrix val_protos = prototype_matrix(split.val_part, modality, val_classes);
    std::vector<int> val_labels;
    for (const Index s : va) val_labels.push_back(split.val_part.labels[s]);
    for (const Real cand : kRidgeLambdaGrid) {
      Real acc;
      if (s2v) {
        const RidgeModel m = fit_ridge(a_tr, b_tr, cand, RidgeDirection::kSemanticToVisual);
        acc = hit_at_k(va_feat, val_labels, m.map(val_protos), val_classes, 1, dist);
      } else {
        const RidgeModel m = fit_ridge(b_tr, a_tr, cand, RidgeDirection::kVisualToSemantic);
        acc = hit_at_k(m.map(va_feat), val_labels, val_protos, val_classes, 1, dist);
      }
      if (acc > best_acc) {
        best_acc = acc;
        best_lambda = cand;
      }
    }
    return best_lambda;
  };

  BaselineOutcome out;
  out.lambda_s2v = pick_lambda(true);
  out.lambda_v2s = pick_lambda(false);

  const RidgeModel s2v = fit_ridge(semantic_train, visual_train, out.lambda_s2v,
                                   RidgeDirection::kSemanticToVisual);
  const RidgeModel v2s = fit_ridge(visual_train, semantic_train, out.lambda_v2s,
                                   RidgeDirection::kVisualToSemantic);

  out.acc_s2v = hit_at_k(test_features, labels, s2v.map(protos), classes, 1, dist);
  out.acc_v2s = hit_at_k(v2s.map(test_features), labels, protos, classes, 1, dist);
  out.shrinkage = shrinkage_ratio(semantic_train, out.lambda_s2v);
  const ShrinkageReport report = shrinkage_check(s2v, semantic_train, visual_train);
  out.norm_mapped = report.norm_mapped;
  out.norm_target = report.norm_target;
  out.shrinkage_satisfied = report.satisfied;
  return out;
}

namespace {

int cmd_train(const RunConfig& config) {
  const Dataset ds = load_dataset(config.data_dir);
  const TrainOutcome outcome = train_pipeline(ds, config);
  fs::create_directories(config.out_dir);
  save_checkpoint(outcome.model, (fs::path(config.out_dir) / "checkpoint.demm").string());
  auto metrics = open_out(fs::path(config.out_dir) / "metrics.csv");
  metrics << "epoch,loss\n";
  for (std::size_t e = 0; e < outcome.history.size(); ++e) {
    metrics << e << "," << format_real(outcome.history[e]) << "\n";
  }
  metrics << "lambda," << format_real(outcome.lambda_used) << "\n";
  metrics << "hit@1," << format_real(outcome.hit1) << "\n";
  metrics << "hit@" << config.k << "," << format_real(outcome.hitk) << "\n";
  std::cout << "unseen hit@1=" << format_real(outcome.hit1) << " hit@" << config.k << "="
            << format_real(outcome.hitk) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& config) {
  const Dataset ds = load_dataset(config.data_dir);
  if (config.checkpoint.empty()) throw ConfigError("eval: --checkpoint required");
  const DemModel model = load_checkpoint(config.checkpoint);
  RunConfig cfg = config;
  if (!model.modalities.empty() && model.modalities.front() == "visual") {
    cfg.direction = "v2s";
  } else if (!model.modalities.empty()) {
    cfg.modalities = model.modalities;
  }
  const auto [hit1, hitk] = evaluate_unseen(model, ds, cfg);
  fs::create_directories(config.out_dir);
  auto out = open_out(fs::path(config.out_dir) / "eval.csv");
  out << "metric,value\n";
  out << "hit@1," << format_real(hit1) << "\n";
  out << "hit@" << config.k << "," << format_real(hitk) << "\n";
  std::cout << "hit@1=" << format_real(hit1) << " hit@" << config.k << "=" << format_real(hitk)
            << "\n";
  return 0;
}

int cmd_baseline(const RunConfig& config) {
  const Dataset ds = load_dataset(config.data_dir);
  const BaselineOutcome out = baseline_pipeline(ds, config);
  fs::create_directories(config.out_dir);
  auto csv = open_out(fs::path(config.out_dir) / "baseline.csv");
  csv << "metric,value\n";
  csv << "acc_s2v," << format_real(out.acc_s2v) << "\n";
  csv << "acc_v2s," << format_real(out.acc_v2s) << "\n";
  csv << "shrinkage_ratio," << format_real(out.shrinkage) << "\n";
  csv << "norm_wa," << format_real(out.norm_mapped) << "\n";
  csv << "norm_b," << format_real(out.norm_target) << "\n";
  csv << "shrinkage_satisfied," << (out.shrinkage_satisfied ? 1 : 0) << "\n";
  csv << "lambda_s2v," << format_real(out.lambda_s2v) << "\n";
  csv << "lambda_v2s," << format_real(out.lambda_v2s) << "\n";
  std::cout << "acc_s2v=" << format_real(out.acc_s2v) << " acc_v2s=" << format_real(out.acc_v2s)
            << " shrinkage_ratio=" << format_real(out.shrinkage)
            << " satisfied=" << (out.shrinkage_satisfied ? 1 : 0) << "\n";
  return 0;
}

int cmd_analyze_hubness(const RunConfig& config) {
  const Dataset ds = load_dataset(config.data_dir);
  const Distance dist = parse_distance(config.distance);
  const std::string modality = linear_modalities(config).front();
  const auto train_samples = seen_sample_indices(ds);
  const auto test_samples = unseen_sample_indices(ds);
  const Matrix semantic_train = semantic_for_samples(ds, modality, train_samples);
  const Matrix visual_train = features_of(ds, train_samples);
  const Matrix test_features = features_of(ds, test_samples);
  const auto classes = sorted_unseen_classes(ds);
  const Matrix protos = prototype_matrix(ds, modality, classes);

  const Real ridge_lambda = config.lambda ? *config.lambda : 1e-1;

  EmbedFn s2v_map, v2s_map;
  std::optional<DemModel> s2v_model, v2s_model;
  if (!config.checkpoint.empty()) {
    s2v_model = load_checkpoint(config.checkpoint);
    s2v_map = [&](const Matrix& semantic) { return embed(*s2v_model, semantic); };
  } else {
    const RidgeModel ridge =
        fit_ridge(semantic_train, visual_train, ridge_lambda, RidgeDirection::kSemanticToVisual);
    s2v_map = [ridge](const Matrix& semantic) { return ridge.map(semantic); };
  }
  if (!config.checkpoint_v2s.empty()) {
    v2s_model = load_checkpoint(config.checkpoint_v2s);
    v2s_map = [&](const Matrix& features) { return embed(*v2s_model, features); };
  } else {
    const RidgeModel ridge =
        fit_ridge(visual_train, semantic_train, ridge_lambda, RidgeDirection::kVisualToSemantic);
    v2s_map = [ridge](const Matrix& features) { return ridge.map(features); };
  }

  const DirectionReport report =
      direction_report(test_features, protos, s2v_map, v2s_map, config.k, dist);
  fs::create_directories(config.out_dir);
  write_nk_csv(report.nk_s2v, report.skew_s2v,
               (fs::path(config.out_dir) / "hubness_s2v.csv").string());
  write_nk_csv(report.nk_v2s, report.skew_v2s,
               (fs::path(config.out_dir) / "hubness_v2s.csv").string());
  auto summary = open_out(fs::path(config.out_dir) / "hubness_summary.csv");
  summary << "metric,value\n";
  summary << "skew_s2v," << format_real(report.skew_s2v) << "\n";
  summary << "skew_v2s," << format_real(report.skew_v2s) << "\n";
  std::cout << "skew_s2v=" << format_real(report.skew_s2v)
            << " skew_v2s=" << format_real(report.skew_v2s) << "\n";
  return 0;
}

int cmd_synth(const RunConfig& config) {
  SynthSpec spec;
  spec.visual_dim = config.synth_visual_dim;
  spec.semantic_dim = config.synth_semantic_dim;
  spec.num_seen = config.synth_seen;
  spec.num_unseen = config.synth_unseen;
  spec.samples_per_class = config.synth_per_class;
  spec.noise_sigma = config.synth_noise;
  spec.depth = config.synth_depth;
  spec.seed = config.seed;
  const SynthResult result = synth_generate(spec);
  save_dataset(result.dataset, config.out_dir, /*binary_features=*/true);
  std::cout << "wrote synthetic dataset to " << config.out_dir << " ("
            << result.dataset.num_samples() << " samples)\n";
  return 0;
}

int cmd_export_embeddings(const RunConfig& config) {
  const Dataset ds = load_dataset(config.data_dir);
  if (config.checkpoint.empty()) throw ConfigError("export-embeddings: --checkpoint required");
  const DemModel model = load_checkpoint(config.checkpoint);
  const auto classes = sorted_unseen_classes(ds);
  const auto test_samples = unseen_sample_indices(ds);
  const Matrix test_features = features_of(ds, test_samples);

  Matrix proto_points, sample_points;
  if (!model.modalities.empty() && model.modalities.front() == "visual") {
    // Reverse-direction model: samples map into the semantic space.
    proto_points = prototype_matrix(ds, linear_modalities(config).front(), classes);
    sample_points = embed(model, test_features);
  } else {
    RunConfig cfg = config;
    if (!model.modalities.empty()) cfg.modalities = model.modalities;
    proto_points = make_prototypes(model, ds, classes).embedded;
    sample_points = test_features;
  }

  fs::create_directories(config.out_dir);
  auto out = open_out(fs::path(config.out_dir) / "embeddings.csv");
  out << "kind,class_id";
  for (Index j = 0; j < proto_points.rows(); ++j) out << ",e" << j;
  out << "\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    out << "proto," << classes[c];
    for (Index j = 0; j < proto_points.rows(); ++j) {
      out << "," << format_real(proto_points(j, static_cast<Index>(c)));
    }
    out << "\n";
  }
  for (std::size_t i = 0; i < test_samples.size(); ++i) {
    out << "sample," << ds.labels[test_samples[i]];
    for (Index j = 0; j < sample_points.rows(); ++j) {
      out << "," << format_real(sample_points(j, static_cast<Index>(i)));
    }
    out << "\n";
  }
  std::cout << "wrote " << (classes.size() + test_samples.size()) << " rows\n";
  return 0;
}

}  // namespace

int run_command(const RunConfig& config) {
  std::cout << describe_config(config);
  switch (config.command) {
    case Command::kTrain: return cmd_train(config);
    case Command::kEval: return cmd_eval(config);
    case Command::kBaseline: return cmd_baseline(config);
    case Command::kAnalyzeHubness: return cmd_analyze_hubness(config);
    case Command::kSynth: return cmd_synth(config);
    case Command::kExportEmbeddings: return cmd_export_embeddings(config);
  }
  throw ConfigError("unknown command");
}

}  // namespace dem
