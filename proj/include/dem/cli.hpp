#pragma once

#include "dem/model.hpp"
#include "dem/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dem {

enum class Command {
  kTrain,
  kEval,
  kBaseline,
  kAnalyzeHubness,
  kSynth,
  kExportEmbeddings,
};

struct RunConfig {
  Command command = Command::kTrain;
  std::string data_dir;
  std::string out_dir = "out";
  std::string checkpoint;        // input checkpoint for eval/analyze/export
  std::string checkpoint_v2s;    // optional reverse-direction checkpoint

  std::vector<std::string> modalities = {"attribute"};
  std::string direction = "s2v";             // s2v | v2s
  std::string loss = "ls";                   // ls | hinge
  std::string optimizer;                     // adam | rmsprop; empty = variant default
  std::string distance = "sqeuclidean";      // sqeuclidean | cosine

  Real learning_rate = 1e-4;
  std::optional<Real> lambda;                // unset => validation grid search
  int epochs = 100;
  int batch = 64;
  std::uint64_t seed = 1;
  int k = 5;
  int hidden = 300;
  bool use_bias = false;
  bool output_relu = true;
  std::optional<Real> clip_norm;             // text variant defaults to 5
  Real margin = 0.1;
  Real val_fraction = 0.2;
  int val_repeats = 1;                       // >1 averages repeated splits

  // Text-variant sizes.
  int max_len = 30;
  int embed_dim = 512;
  int lstm_hidden = 512;

  // synth command.
  int synth_visual_dim = 100;
  int synth_semantic_dim = 20;
  int synth_seen = 30;
  int synth_unseen = 10;
  int synth_per_class = 50;
  Real synth_noise = 0.3;
  int synth_depth = 2;

  int threads = 1;                           // DEM_THREADS
};

/// key=value lines, '#' comments. Unknown keys are rejected.
void apply_config_file(RunConfig& config, const std::string& path);

/// Applies one key=value assignment (shared by the file parser and tests).
void apply_key_value(RunConfig& config, const std::string& key, const std::string& value);

/// Echoes the effective configuration, one key=value per line.
std::string describe_config(const RunConfig& config);

/// Runs the selected command; returns 0 on success. Output files land in
/// config.out_dir. Errors propagate as exceptions.
int run_command(const RunConfig& config);

// Exposed for tests and for the acceptance suite.
Distance parse_distance(const std::string& name);
std::vector<int> sorted_unseen_classes(const Dataset& ds);

struct TrainOutcome {
  DemModel model;
  std::vector<Real> history;
  Real lambda_used = 0.0;
  bool grid_searched = false;
  Real hit1 = 0.0;
  Real hitk = 0.0;
};

/// The train pipeline behind `train` (grid search when lambda unset, final
/// retrain, unseen evaluation). Exposed so tests can drive it directly.
TrainOutcome train_pipeline(const Dataset& ds, const RunConfig& config);

struct BaselineOutcome {
  Real acc_s2v = 0.0;
  Real acc_v2s = 0.0;
  Real shrinkage = 0.0;
  Real norm_mapped = 0.0;
  Real norm_target = 0.0;
  bool shrinkage_satisfied = false;
  Real lambda_s2v = 0.0;
  Real lambda_v2s = 0.0;
};

BaselineOutcome baseline_pipeline(const Dataset& ds, const RunConfig& config);

}  // namespace dem
