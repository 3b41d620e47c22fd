#include "dem/cli.hpp"
#include "dem/types.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

namespace {

void add_common_options(CLI::App* cmd, dem::RunConfig& config, std::string& config_file,
                        std::string& modality_list, double& lambda_opt, double& clip_opt) {
  cmd->add_option("--data", config.data_dir, "Dataset directory");
  cmd->add_option("--config", config_file, "key=value config file (flags override)");
  cmd->add_option("--out", config.out_dir, "Output directory");
  cmd->add_option("--direction", config.direction, "s2v or v2s")
      ->check(CLI::IsMember({"s2v", "v2s"}));
  cmd->add_option("--loss", config.loss, "ls or hinge")->check(CLI::IsMember({"ls", "hinge"}));
  cmd->add_option("--modality", modality_list, "Comma-separated modality list");
  cmd->add_option("--optimizer", config.optimizer, "adam or rmsprop");
  cmd->add_option("--distance", config.distance, "sqeuclidean or cosine")
      ->check(CLI::IsMember({"sqeuclidean", "cosine"}));
  cmd->add_option("--lr", config.learning_rate, "Learning rate");
  cmd->add_option("--lambda", lambda_opt, "Regularisation weight (omit to grid-search)");
  cmd->add_option("--epochs", config.epochs, "Training epochs");
  cmd->add_option("--batch", config.batch, "Minibatch size");
  cmd->add_option("--seed", config.seed, "RNG seed");
  cmd->add_option("--k", config.k, "k for hit@k and hubness");
  cmd->add_option("--hidden", config.hidden, "Hidden layer size M");
  cmd->add_flag("--bias,!--no-bias", config.use_bias, "Enable layer biases");
  cmd->add_flag("!--no-output-relu", config.output_relu, "Disable the output ReLU");
  cmd->add_option("--clip", clip_opt, "Global gradient clipping norm");
  cmd->add_option("--margin", config.margin, "Hinge margin");
  cmd->add_option("--val-fraction", config.val_fraction, "Validation class fraction");
  cmd->add_option("--val-repeats", config.val_repeats, "Averaged validation splits");
  cmd->add_option("--checkpoint", config.checkpoint, "Model checkpoint path");
  cmd->add_option("--checkpoint-v2s", config.checkpoint_v2s, "Reverse-direction checkpoint");
  cmd->add_option("--max-len", config.max_len, "Token sequence length");
  cmd->add_option("--embed-dim", config.embed_dim, "Word embedding size");
  cmd->add_option("--lstm-hidden", config.lstm_hidden, "LSTM hidden size");
}

std::vector<std::string> split_commas(const std::string& value) {
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

// The config file loads before CLI11 parses, so flags always win.
std::string prescan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot learning engine: semantic-to-visual embedding, ridge baselines, "
               "and hubness diagnostics"};
  app.require_subcommand(1);

  dem::RunConfig config;
  std::string config_file;
  std::string modality_list;
  double lambda_opt = -1.0;
  double clip_opt = -1.0;

  const std::string pre_config = prescan_config_path(argc, argv);
  if (!pre_config.empty()) {
    try {
      dem::apply_config_file(config, pre_config);
      if (config.lambda) lambda_opt = *config.lambda;
      if (config.clip_norm) clip_opt = *config.clip_norm;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  struct SubCmd {
    CLI::App* app;
    dem::Command command;
  };
  std::vector<SubCmd> subs;
  subs.push_back({app.add_subcommand("train", "Train an embedding model"), dem::Command::kTrain});
  subs.push_back({app.add_subcommand("eval", "Evaluate a checkpoint"), dem::Command::kEval});
  subs.push_back(
      {app.add_subcommand("baseline", "Closed-form ridge baselines in both directions"),
       dem::Command::kBaseline});
  subs.push_back({app.add_subcommand("analyze-hubness", "N_k skewness per direction"),
                  dem::Command::kAnalyzeHubness});
  subs.push_back({app.add_subcommand("synth", "Generate the synthetic benchmark"),
                  dem::Command::kSynth});
  subs.push_back({app.add_subcommand("export-embeddings", "Dump prototypes and test points"),
                  dem::Command::kExportEmbeddings});

  for (auto& sub : subs) {
    add_common_options(sub.app, config, config_file, modality_list, lambda_opt, clip_opt);
  }
  CLI::App* synth = subs[4].app;
  synth->add_option("--visual-dim", config.synth_visual_dim, "Feature dimension D");
  synth->add_option("--semantic-dim", config.synth_semantic_dim, "Semantic dimension L");
  synth->add_option("--seen", config.synth_seen, "Seen class count");
  synth->add_option("--unseen", config.synth_unseen, "Unseen class count");
  synth->add_option("--per-class", config.synth_per_class, "Samples per class");
  synth->add_option("--noise", config.synth_noise, "Feature noise sigma");
  synth->add_option("--depth", config.synth_depth, "Generator nonlinearity depth");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& sub : subs) {
      if (sub.app->parsed()) config.command = sub.command;
    }
    if (!modality_list.empty()) config.modalities = split_commas(modality_list);
    if (lambda_opt >= 0.0) config.lambda = lambda_opt;
    if (clip_opt >= 0.0) config.clip_norm = clip_opt;
    if (const char* threads = std::getenv("DEM_THREADS")) {
      config.threads = std::max(1, std::atoi(threads));
    }
    Eigen::setNbThreads(config.threads);
    return dem::run_command(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
