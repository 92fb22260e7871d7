#include "magcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "magcn/checkpoint.hpp"
#include "magcn/errors.hpp"

namespace magcn {

using nlohmann::json;

// ---- config -------------------------------------------------------------------

namespace {

const std::set<std::string> kModelKeys = {"d",   "L",   "M",   "Z",   "d_s", "alpha", "beta", "num_classes",
                                          "use_sentiment_embedding", "use_consistency_loss", "use_dense_gcn",
                                          "polarity_aware_sentiment", "modalities", "loss", "d_e", "d_v", "d_a",
                                          "vocabulary"};
const std::set<std::string> kRunKeys = {"seed", "epochs", "batch_size", "lr", "optimizer", "adam_beta1",
                                        "adam_beta2", "adam_epsilon", "data", "split", "lexicon_positive",
                                        "lexicon_negative", "out", "target_train_accuracy", "tag"};
const std::string kSyntheticPrefix = "synthetic.";

SyntheticSpec synthetic_from_json(const json& flat) {
  SyntheticSpec s;
  for (const auto& [key, value] : flat.items()) {
    const std::string k = key.rfind(kSyntheticPrefix, 0) == 0 ? key.substr(kSyntheticPrefix.size()) : key;
    if (k == "n_samples") s.n_samples = value.get<std::size_t>();
    else if (k == "seq_len") s.seq_len = value.get<std::size_t>();
    else if (k == "d_e") s.language_width = value.get<std::size_t>();
    else if (k == "d_v") s.vision_width = value.get<std::size_t>();
    else if (k == "d_a") s.acoustic_width = value.get<std::size_t>();
    else if (k == "num_classes") s.num_classes = value.get<std::size_t>();
    else if (k == "class_separation") s.class_separation = value.get<double>();
    else if (k == "noise") s.noise = value.get<double>();
    else if (k == "modality_signal") s.modality_signal = ModalitySet::parse(value.get<std::string>());
    else if (k == "seed") s.seed = value.get<std::uint64_t>();
    else throw ConfigError("unknown config key: " + key);
  }
  return s;
}

json synthetic_to_json(const SyntheticSpec& s) {
  return {{"synthetic.n_samples", s.n_samples},
          {"synthetic.seq_len", s.seq_len},
          {"synthetic.d_e", s.language_width},
          {"synthetic.d_v", s.vision_width},
          {"synthetic.d_a", s.acoustic_width},
          {"synthetic.num_classes", s.num_classes},
          {"synthetic.class_separation", s.class_separation},
          {"synthetic.noise", s.noise},
          {"synthetic.modality_signal", s.modality_signal.str()},
          {"synthetic.seed", s.seed}};
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a flat object");
  RunConfig cfg;
  json model = json::object();
  json synthetic = json::object();
  for (const auto& [key, value] : j.items()) {
    if (kModelKeys.count(key)) {
      model[key] = value;
    } else if (key.rfind(kSyntheticPrefix, 0) == 0) {
      synthetic[key] = value;
    } else if (!kRunKeys.count(key)) {
      throw ConfigError("unknown config key: " + key);
    }
  }
  if (!j.contains("seed")) throw ConfigError("run config requires a seed");
  try {
    cfg.model = config_from_json(model);
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.optimizer.learning_rate = j.value("lr", cfg.optimizer.learning_rate);
    cfg.optimizer.beta1 = j.value("adam_beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = j.value("adam_beta2", cfg.optimizer.beta2);
    cfg.optimizer.epsilon = j.value("adam_epsilon", cfg.optimizer.epsilon);
    const std::string opt = j.value("optimizer", std::string("adam"));
    if (opt == "adam") cfg.optimizer.kind = OptimizerKind::kAdam;
    else if (opt == "sgd") cfg.optimizer.kind = OptimizerKind::kSgd;
    else throw ConfigError("unknown optimizer: " + opt);
    cfg.data_path = j.value("data", std::string());
    if (j.contains("split")) cfg.split_ratios = j["split"].get<std::array<double, 3>>();
    cfg.lexicon_positive = j.value("lexicon_positive", std::string());
    cfg.lexicon_negative = j.value("lexicon_negative", std::string());
    cfg.out_dir = j.value("out", std::string());
    cfg.target_train_accuracy = j.value("target_train_accuracy", 0.0);
    cfg.tag = j.value("tag", cfg.tag);
    if (!synthetic.empty()) cfg.synthetic = synthetic_from_json(synthetic);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (cfg.data_path.empty() && !cfg.synthetic) cfg.synthetic = SyntheticSpec{};
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json j = config_to_json(cfg.model);
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.optimizer.learning_rate;
  j["optimizer"] = cfg.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd";
  j["adam_beta1"] = cfg.optimizer.beta1;
  j["adam_beta2"] = cfg.optimizer.beta2;
  j["adam_epsilon"] = cfg.optimizer.epsilon;
  if (!cfg.data_path.empty()) j["data"] = cfg.data_path;
  j["split"] = cfg.split_ratios;
  if (!cfg.lexicon_positive.empty()) j["lexicon_positive"] = cfg.lexicon_positive;
  if (!cfg.lexicon_negative.empty()) j["lexicon_negative"] = cfg.lexicon_negative;
  if (!cfg.out_dir.empty()) j["out"] = cfg.out_dir;
  j["target_train_accuracy"] = cfg.target_train_accuracy;
  j["tag"] = cfg.tag;
  if (cfg.synthetic) j.update(synthetic_to_json(*cfg.synthetic));
  return j;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a flat object");
  try {
    return synthetic_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad synthetic spec value: ") + e.what());
  }
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read spec " + path.string());
  try {
    return synthetic_spec_from_json(json::parse(in, nullptr, true, true));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

// ---- metrics --------------------------------------------------------------------

ClassificationMetrics classification_metrics(std::span<const std::size_t> predictions,
                                             std::span<const std::size_t> labels, std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw ContractError("metrics: prediction and label counts differ");
  ClassificationMetrics m;
  m.total = labels.size();
  if (labels.empty()) return m;

  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

  auto class_f1 = [&](std::size_t cls, bool* degenerate) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred = predictions[i] == cls;
      const bool gold = labels[i] == cls;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
    if (degenerate) *degenerate = tp + fp == 0 && tp + fn == 0;
    if (tp == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * p * r / (p + r);
  };
  const std::size_t classes = std::max<std::size_t>(num_classes, 2);
  m.f1 = class_f1(classes - 1, &m.f1_degenerate);
  double macro = 0.0;
  for (std::size_t c = 0; c < classes; ++c) macro += class_f1(c, nullptr);
  m.f1_macro = macro / static_cast<double>(classes);
  return m;
}

json report_to_json(const MetricsReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_accuracy", e.val_accuracy},
                      {"val_f1", e.val_f1},
                      {"consistency_term", e.consistency_term},
                      {"sentiment_grad_max", e.sentiment_grad_max}});
  }
  return {{"tag", r.tag},
          {"split", r.split},
          {"accuracy", r.accuracy},
          {"f1", r.f1},
          {"f1_macro", r.f1_macro},
          {"f1_degenerate", r.f1_degenerate},
          {"loss", r.loss},
          {"best_train_accuracy", r.best_train_accuracy},
          {"best_epoch", r.best_epoch},
          {"parameter_count", r.parameter_count},
          {"max_sentiment_grad", r.max_sentiment_grad},
          {"max_consistency_term", r.max_consistency_term},
          {"loss_curve", r.loss_curve},
          {"epochs", epochs}};
}

// ---- optimizer ------------------------------------------------------------------

Optimizer::Optimizer(const ParamStore& params, OptimizerSettings settings) : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& [name, t] : params.items()) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Optimizer::step(ParamStore& params) {
  ++steps_;
  const double lr = settings_.learning_rate;
  const double c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(steps_));
  std::size_t k = 0;
  for (const auto& [name, param] : params.items()) {
    Tensor t = param;
    auto values = t.mutable_data();
    const auto grad = t.grad();
    if (grad.size() == values.size()) {
      if (settings_.kind == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
      } else {
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
          m[i] = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * grad[i];
          v[i] = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * grad[i] * grad[i];
          values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + settings_.epsilon);
        }
      }
    }
    ++k;
  }
}

// ---- training -------------------------------------------------------------------

ModelInput prepare_input(const UtteranceSample& sample, const MagcnModel& model, const Lexicon& lexicon) {
  const MagcnConfig& c = model.config();
  ModelInput in;
  const std::size_t n = sample.tokens.size();
  if (c.modalities.has(Modality::kLanguage)) {
    in.flags = c.polarity_aware_sentiment ? polarity_flags(sample.tokens, lexicon)
                                          : sentiment_flags(sample.tokens, lexicon);
    if (c.vocabulary.empty()) {
      if (!sample.language) throw ValidationError("sample has no language vectors and the model has no vocabulary");
      in.language = Tensor::matrix(sample.language->rows, sample.language->cols, sample.language->values);
    } else {
      for (const auto& t : sample.tokens) in.token_ids.push_back(model.token_id(t));
    }
  }
  if (c.modalities.has(Modality::kVision)) {
    in.vision = Tensor::matrix(sample.vision.rows, sample.vision.cols, sample.vision.values);
  }
  if (c.modalities.has(Modality::kAcoustic)) {
    in.acoustic = Tensor::matrix(sample.acoustic.rows, sample.acoustic.cols, sample.acoustic.values);
  }
  if (in.length() != n) throw AlignmentError("sample features do not match its token count");
  return in;
}

namespace {

struct PreparedSplit {
  std::vector<ModelInput> inputs;
  std::vector<std::size_t> labels;
};

PreparedSplit prepare_split(const Dataset& ds, const MagcnModel& model, const Lexicon& lexicon) {
  PreparedSplit out;
  for (const auto& s : ds.samples) {
    out.inputs.push_back(prepare_input(s, model, lexicon));
    out.labels.push_back(s.label);
  }
  return out;
}

struct SplitEval {
  ClassificationMetrics metrics;
  double loss = 0.0;
};

SplitEval evaluate_split(const MagcnModel& model, const PreparedSplit& split) {
  SplitEval out;
  if (split.inputs.empty()) return out;
  NoGradGuard no_grad;
  std::vector<std::size_t> preds;
  double loss = 0.0;
  for (std::size_t i = 0; i < split.inputs.size(); ++i) {
    const ForwardTrace tr = magcn_forward(split.inputs[i], model);
    preds.push_back(predicted_class(tr));
    const std::size_t label = split.labels[i];
    loss += batch_loss(std::span<const ForwardTrace>(&tr, 1), std::span<const std::size_t>(&label, 1),
                       model.config())
                .total.item();
  }
  out.metrics = classification_metrics(preds, split.labels, model.config().num_classes);
  out.loss = loss / static_cast<double>(split.inputs.size());
  return out;
}

void fill_headline(MetricsReport& r, const SplitEval& e, std::string split) {
  r.split = std::move(split);
  r.accuracy = e.metrics.accuracy;
  r.f1 = e.metrics.f1;
  r.f1_macro = e.metrics.f1_macro;
  r.f1_degenerate = e.metrics.f1_degenerate;
  r.loss = e.loss;
}

std::vector<std::string> build_vocabulary(const Dataset& ds) {
  std::set<std::string> words;
  for (const auto& s : ds.samples)
    for (const auto& t : s.tokens) words.insert(to_lower(t));
  words.erase("<unk>");
  std::vector<std::string> vocab{"<unk>"};
  vocab.insert(vocab.end(), words.begin(), words.end());
  return vocab;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "run " << r.tag << "\n";
  os << "  parameters        " << r.parameter_count << "\n";
  os << "  best epoch        " << r.best_epoch << "\n";
  os << "  best train acc    " << r.best_train_accuracy << "\n";
  os << "  " << r.split << " accuracy     " << r.accuracy << "\n";
  os << "  " << r.split << " f1           " << r.f1 << (r.f1_degenerate ? " (degenerate)" : "") << "\n";
  os << "  " << r.split << " macro f1     " << r.f1_macro << "\n";
  os << "  " << r.split << " loss         " << r.loss << "\n";
  os << "\n  epoch  train_loss  train_acc  val_acc  val_f1\n";
  for (const auto& e : r.epochs) {
    os << "  " << std::setw(5) << e.epoch << "  " << std::setw(10) << e.train_loss << "  " << std::setw(9)
       << e.train_accuracy << "  " << std::setw(7) << e.val_accuracy << "  " << std::setw(6) << e.val_f1 << "\n";
  }
  return os.str();
}

}  // namespace

TrainResult train(const RunConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");

  Dataset data = cfg.synthetic ? generate_synthetic(*cfg.synthetic) : load_dataset(cfg.data_path);
  Lexicon lexicon;
  if (!cfg.lexicon_positive.empty() || !cfg.lexicon_negative.empty()) {
    lexicon = Lexicon::load(cfg.lexicon_positive, cfg.lexicon_negative);
  } else if (cfg.synthetic) {
    lexicon = synthetic_lexicon();
  }

  const DatasetSplits splits = split(data, cfg.split_ratios, cfg.seed);
  if (splits.train.samples.empty()) throw ConfigError("training split is empty");

  MagcnConfig mc = cfg.model;
  const DatasetManifest& man = data.manifest;
  if (man.vision_width) mc.vision_width = man.vision_width;
  if (man.acoustic_width) mc.acoustic_width = man.acoustic_width;
  if (man.language_width) mc.language_width = man.language_width;
  if (man.num_classes > mc.num_classes) mc.num_classes = man.num_classes;
  if (mc.modalities.has(Modality::kLanguage) && mc.vocabulary.empty() && man.language_width == 0) {
    mc.vocabulary = build_vocabulary(splits.train);
  }

  MagcnModel model(mc, cfg.seed);
  Optimizer optimizer(model.params(), cfg.optimizer);
  const PreparedSplit train_set = prepare_split(splits.train, model, lexicon);
  const PreparedSplit val_set = prepare_split(splits.val, model, lexicon);
  const PreparedSplit test_set = prepare_split(splits.test, model, lexicon);
  const PreparedSplit& select_set = val_set.inputs.empty() ? train_set : val_set;

  MetricsReport report;
  report.tag = cfg.tag;
  report.parameter_count = model.params().parameter_count();

  auto record_epoch = [&](std::size_t epoch, double loss, double lc_term, double se_grad) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss;
    const SplitEval tr = evaluate_split(model, train_set);
    rec.train_accuracy = tr.metrics.accuracy;
    const SplitEval va = evaluate_split(model, select_set);
    rec.val_accuracy = va.metrics.accuracy;
    rec.val_f1 = va.metrics.f1;
    rec.consistency_term = lc_term;
    rec.sentiment_grad_max = se_grad;
    report.loss_curve.push_back(loss);
    report.epochs.push_back(rec);
    report.best_train_accuracy = std::max(report.best_train_accuracy, rec.train_accuracy);
    return rec;
  };

  // Epoch 0 is the untrained model.
  EpochRecord first = record_epoch(0, evaluate_split(model, train_set).loss, 0.0, 0.0);
  double best_val = first.val_accuracy;
  auto best_params = model.params().snapshot();

  Rng order_rng(cfg.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(train_set.inputs.size());
  std::size_t step = 0;
  const Tensor sentiment_table = model.sentiment() ? model.sentiment()->table : Tensor();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    double lc_term = 0.0;
    double se_grad = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      model.params().zero_grad();
      ++step;
      const std::string where = "step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + ")";
      std::vector<ForwardTrace> traces;
      std::vector<std::size_t> labels;
      BatchLoss bl;
      try {
        for (std::size_t k = start; k < end; ++k) {
          traces.push_back(magcn_forward(train_set.inputs[order[k]], model));
          labels.push_back(train_set.labels[order[k]]);
        }
        bl = batch_loss(traces, labels, model.config());
      } catch (const NumericError& e) {
        throw NumericError("training diverged at " + where + ": " + e.what());
      }
      const double value = bl.total.item();
      if (!std::isfinite(value)) throw NumericError("training diverged: non-finite loss at " + where);
      backward(bl.total);
      if (sentiment_table.defined()) {
        for (double g : sentiment_table.grad()) se_grad = std::max(se_grad, std::fabs(g));
      }
      lc_term = std::max(lc_term, std::fabs(bl.consistency_term));
      optimizer.step(model.params());
      epoch_loss += value;
      ++batches;
    }
    EpochRecord rec;
    try {
      rec = record_epoch(epoch, epoch_loss / static_cast<double>(batches), lc_term, se_grad);
    } catch (const NumericError& e) {
      throw NumericError("training diverged after step " + std::to_string(step) + " (epoch " +
                         std::to_string(epoch) + "): " + e.what());
    }
    report.max_sentiment_grad = std::max(report.max_sentiment_grad, se_grad);
    report.max_consistency_term = std::max(report.max_consistency_term, lc_term);
    if (rec.val_accuracy > best_val) {
      best_val = rec.val_accuracy;
      best_params = model.params().snapshot();
      report.best_epoch = epoch;
    }
    if (cfg.target_train_accuracy > 0.0 && rec.train_accuracy >= cfg.target_train_accuracy) break;
  }

  model.params().restore(best_params);
  if (!test_set.inputs.empty()) {
    fill_headline(report, evaluate_split(model, test_set), "test");
  } else if (!val_set.inputs.empty()) {
    fill_headline(report, evaluate_split(model, val_set), "val");
  } else {
    fill_headline(report, evaluate_split(model, train_set), "train");
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path out(cfg.out_dir);
    save_checkpoint(out / "checkpoint.bin", model, lexicon);
    std::ofstream metrics(out / "metrics.jsonl");
    for (const auto& e : report.epochs) {
      metrics << json{{"tag", report.tag},
                      {"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_accuracy", e.val_accuracy},
                      {"val_f1", e.val_f1},
                      {"consistency_term", e.consistency_term},
                      {"sentiment_grad_max", e.sentiment_grad_max}}
                     .dump()
              << '\n';
    }
    json final = report_to_json(report);
    final.erase("epochs");
    metrics << final.dump() << '\n';
    std::ofstream(out / "report.txt") << format_report(report);
  }

  return {std::move(report), std::move(model), std::move(lexicon)};
}

MetricsReport evaluate(const MagcnModel& model, const Lexicon& lexicon, const Dataset& dataset) {
  const MagcnConfig& c = model.config();
  const DatasetManifest& m = dataset.manifest;
  auto mismatch = [](const char* what, std::size_t model_w, std::size_t data_w) {
    throw ValidationError(std::string(what) + " width: model expects " + std::to_string(model_w) + ", data has " +
                          std::to_string(data_w));
  };
  if (c.modalities.has(Modality::kVision) && m.vision_width != c.vision_width) {
    mismatch("vision", c.vision_width, m.vision_width);
  }
  if (c.modalities.has(Modality::kAcoustic) && m.acoustic_width != c.acoustic_width) {
    mismatch("acoustic", c.acoustic_width, m.acoustic_width);
  }
  if (c.modalities.has(Modality::kLanguage) && c.vocabulary.empty() && m.language_width != c.language_width) {
    mismatch("language", c.language_width, m.language_width);
  }
  if (m.num_classes > c.num_classes) {
    throw ValidationError("data has " + std::to_string(m.num_classes) + " classes, model predicts " +
                          std::to_string(c.num_classes));
  }
  const PreparedSplit set = prepare_split(dataset, model, lexicon);
  MetricsReport r;
  r.tag = "eval";
  r.parameter_count = model.params().parameter_count();
  fill_headline(r, evaluate_split(model, set), "data");
  return r;
}

MetricsReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& data) {
  const Checkpoint ck = read_checkpoint(checkpoint);
  const MagcnModel model = instantiate(ck);
  return evaluate(model, ck.lexicon, load_dataset(data));
}

GradcheckReport model_gradcheck(const MagcnConfig& config, std::size_t n, std::uint64_t seed, double epsilon,
                                double tolerance) {
  if (n == 0) throw ConfigError("gradcheck needs a non-empty utterance");
  MagcnConfig mc = config;
  mc.vocabulary.clear();
  MagcnModel model(mc, seed);
  Rng rng(seed + 1);
  auto random_matrix = [&](std::size_t cols) {
    std::vector<double> v(n * cols);
    for (double& x : v) x = rng.normal();
    return Tensor::matrix(n, cols, std::move(v));
  };
  ModelInput in;
  if (mc.modalities.has(Modality::kLanguage)) {
    in.language = random_matrix(mc.language_width);
    const std::size_t kinds = mc.polarity_aware_sentiment ? 3 : 2;
    for (std::size_t i = 0; i < n; ++i) in.flags.push_back(i % kinds);
  }
  if (mc.modalities.has(Modality::kVision)) in.vision = random_matrix(mc.vision_width);
  if (mc.modalities.has(Modality::kAcoustic)) in.acoustic = random_matrix(mc.acoustic_width);
  const std::size_t label = mc.num_classes - 1;
  auto loss = [&] {
    const ForwardTrace tr = magcn_forward(in, model);
    return batch_loss(std::span<const ForwardTrace>(&tr, 1), std::span<const std::size_t>(&label, 1), mc).total;
  };
  return gradcheck(loss, model.params(), epsilon, tolerance);
}

// ---- ablation -------------------------------------------------------------------

AblationGrid parse_ablation_grid(const std::string& name) {
  if (name == "se") return AblationGrid::kSentiment;
  if (name == "cl") return AblationGrid::kConsistency;
  if (name == "gcn") return AblationGrid::kGcn;
  if (name == "modality") return AblationGrid::kModality;
  if (name == "components" || name == "all") return AblationGrid::kComponents;
  throw ConfigError("unknown ablation grid: " + name + " (expected se, cl, gcn, modality or components)");
}

std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base, AblationGrid grid) {
  std::vector<std::pair<std::string, RunConfig>> out;
  auto variant = [&](std::string tag, auto edit) {
    RunConfig c = base;
    edit(c.model);
    c.tag = tag;
    if (!base.out_dir.empty()) {
      std::string dir = tag;
      std::replace_if(dir.begin(), dir.end(), [](char ch) { return ch == ' ' || ch == '/' || ch == '+'; }, '_');
      c.out_dir = (std::filesystem::path(base.out_dir) / dir).string();
    }
    out.emplace_back(std::move(tag), std::move(c));
  };
  auto none = [](MagcnConfig&) {};
  auto no_se = [](MagcnConfig& m) { m.use_sentiment_embedding = false; };
  auto no_cl = [](MagcnConfig& m) {
    m.use_consistency_loss = false;
    m.beta = 0.0;
  };
  auto vanilla = [](MagcnConfig& m) { m.use_dense_gcn = false; };
  switch (grid) {
    case AblationGrid::kSentiment:
      variant("MAGCN", none);
      variant("MAGCN w/o SE", no_se);
      break;
    case AblationGrid::kConsistency:
      variant("MAGCN", none);
      variant("MAGCN w/o CL", no_cl);
      break;
    case AblationGrid::kGcn:
      variant("MAGCN", none);
      variant("MAGCN w/o DCGCN", vanilla);
      break;
    case AblationGrid::kComponents:
      variant("MAGCN", none);
      variant("MAGCN w/o SE", no_se);
      variant("MAGCN w/o CL", no_cl);
      variant("MAGCN w/o DCGCN", vanilla);
      break;
    case AblationGrid::kModality:
      for (const ModalitySet& s : modality_grid()) {
        variant(s.str(), [s](MagcnConfig& m) { m.modalities = s; });
      }
      break;
  }
  return out;
}

std::vector<MetricsReport> ablate(const RunConfig& base, AblationGrid grid) {
  std::vector<MetricsReport> reports;
  for (const auto& [tag, cfg] : ablation_variants(base, grid)) reports.push_back(train(cfg).report);
  return reports;
}

std::string format_ablation_table(std::span<const MetricsReport> reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.tag.size());
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(static_cast<int>(width)) << "Model" << std::right << "  " << std::setw(7) << "Acc"
     << "  " << std::setw(7) << "F1" << "  " << std::setw(9) << "Params" << "\n";
  for (const auto& r : reports) {
    os << std::left << std::setw(static_cast<int>(width)) << r.tag << std::right << "  " << std::setw(7)
       << 100.0 * r.accuracy << "  " << std::setw(7) << 100.0 * r.f1 << "  " << std::setw(9) << r.parameter_count
       << "\n";
  }
  return os.str();
}

}  // namespace magcn
