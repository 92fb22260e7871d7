#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "magcn/data.hpp"
#include "magcn/embeddings.hpp"
#include "magcn/gradcheck.hpp"
#include "magcn/model.hpp"

namespace magcn {

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Everything a run depends on. Two runs from equal RunConfigs produce
/// bit-identical reports.
struct RunConfig {
  MagcnConfig model;
  OptimizerSettings optimizer;
  std::size_t epochs = 300;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::string data_path;
  std::optional<SyntheticSpec> synthetic;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::string lexicon_positive;
  std::string lexicon_negative;
  std::string out_dir;
  /// Stop once train accuracy reaches this value; 0 disables.
  double target_train_accuracy = 0.0;
  std::string tag = "MAGCN";
};

/// Flat JSON object. Model keys (d, L, M, ...) sit next to run keys;
/// synthetic-data keys carry a "synthetic." prefix. "seed" is required.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);
/// Generator spec keys, with or without the "synthetic." prefix.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // positive class (highest class id)
  double f1_macro = 0.0;
  bool f1_degenerate = false;  // no positive predictions and no positive labels
  std::size_t total = 0;
};

ClassificationMetrics classification_metrics(std::span<const std::size_t> predictions,
                                             std::span<const std::size_t> labels, std::size_t num_classes);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
  double consistency_term = 0.0;    // largest beta * L_c added to a batch loss this epoch
  double sentiment_grad_max = 0.0;  // largest |grad| seen on the sentiment table this epoch
};

struct MetricsReport {
  std::string tag;
  std::string split;  // which split the headline metrics were computed on
  double accuracy = 0.0;
  double f1 = 0.0;
  double f1_macro = 0.0;
  bool f1_degenerate = false;
  double loss = 0.0;
  double best_train_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::size_t parameter_count = 0;
  double max_sentiment_grad = 0.0;
  double max_consistency_term = 0.0;
  std::vector<double> loss_curve;
  std::vector<EpochRecord> epochs;
};

nlohmann::json report_to_json(const MetricsReport& report);

class Optimizer {
 public:
  Optimizer(const ParamStore& params, OptimizerSettings settings);
  void step(ParamStore& params);

 private:
  OptimizerSettings settings_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Converts a stored utterance into model inputs (flags from the lexicon,
/// token ids when the model uses a vocabulary).
ModelInput prepare_input(const UtteranceSample& sample, const MagcnModel& model, const Lexicon& lexicon);

struct TrainResult {
  MetricsReport report;
  MagcnModel model;  // best-validation parameters
  Lexicon lexicon;
};

/// Full training run. Writes checkpoint.bin, metrics.jsonl and report.txt
/// to out_dir when set. Throws NumericError naming the step if the loss
/// stops being finite.
TrainResult train(const RunConfig& cfg);

MetricsReport evaluate(const MagcnModel& model, const Lexicon& lexicon, const Dataset& dataset);
MetricsReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& data);

/// Gradcheck of the full model on one random utterance of length n, covering
/// every trainable parameter. Uses dense language vectors (no vocabulary).
GradcheckReport model_gradcheck(const MagcnConfig& config, std::size_t n, std::uint64_t seed,
                                double epsilon = 1e-5, double tolerance = 1e-4);

enum class AblationGrid { kSentiment, kConsistency, kGcn, kModality, kComponents };

AblationGrid parse_ablation_grid(const std::string& name);
/// Config variants of a grid with their row tags, base first where applicable.
std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base, AblationGrid grid);
std::vector<MetricsReport> ablate(const RunConfig& base, AblationGrid grid);
std::string format_ablation_table(std::span<const MetricsReport> reports);

}  // namespace magcn
