#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splat/data.hpp"
#include "splat/metrics.hpp"
#include "splat/model.hpp"

namespace splat {

struct OptimConfig {
  double learning_rate = 1e-5;
  double warmup_fraction = 0.1;
  int epochs = 10;
  int batch_size = 32;
  void validate() const;
};

struct PathsConfig {
  std::string schema;
  std::string dialogues;
  std::string dev_dialogues;  // optional; training dialogues double as dev
  std::string vocab;
  std::string params;  // initialization checkpoint for train, model for eval
  std::string corpus;  // plain-text pretraining corpus
  std::string output;  // directory all commands write into
};

struct GenConfig {
  int n_services = 4;
  int n_dialogues = 64;
};

struct RunConfig {
  SplatConfig model;
  OptimConfig optim;
  uint64_t seed = 0;
  PathsConfig paths;
  GenConfig gen;
  std::vector<std::string> variants;  // schema variant files for robustness
  MatchMode eval_mode = MatchMode::Fuzzy;
  double fuzzy_threshold = 0.9;
  int pretrain_steps = 200;
  bool cache_rss_instances = false;

  static RunConfig from_json_text(const std::string& text, const std::string& origin);
  static RunConfig from_file(const std::string& path);
  void validate() const;
};

struct TrainResult {
  std::string best_params_path;
  int best_epoch = 0;  // 0 = initialization
  std::vector<double> dev_jga_per_epoch;
  std::vector<double> mean_loss_per_epoch;
  EvalReport train_report;  // best checkpoint scored on the training set
};

struct PretrainResult {
  std::string params_path;
  std::vector<double> loss_per_step;
  int n_instances = 0;
};

struct RobustnessRow {
  std::string variant;
  double jga = 0.0;
  double delta = 0.0;
};

struct RobustnessResult {
  double original_jga = 0.0;
  std::vector<RobustnessRow> rows;
  double avg_variant_jga = 0.0;
  double avg_delta = 0.0;
  double max_delta = 0.0;  // largest drop (most negative delta)
};

void cmd_gen_synth(const RunConfig& cfg);
TrainResult cmd_train(const RunConfig& cfg);
PretrainResult cmd_pretrain_rss(const RunConfig& cfg);
EvalReport cmd_eval(const RunConfig& cfg);
RobustnessResult cmd_robustness(const RunConfig& cfg);

// Shared helpers (also used by the test and acceptance suites).
Vocabulary load_or_build_vocab(const RunConfig& cfg, const Corpus& corpus);
std::vector<DstInstance> corpus_instances(const Corpus& corpus, const Vocabulary& vocab,
                                          const SplatConfig& cfg);
EvalReport evaluate_corpus(ParamStore& params, const SplatConfig& cfg, const Corpus& corpus,
                           const Vocabulary& vocab, MatchMode mode, double threshold,
                           std::string* predictions_jsonl = nullptr);

}  // namespace splat
