#include "magcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "magcn/errors.hpp"
#include "magcn/params.hpp"

namespace magcn {

using nlohmann::json;

namespace {

const std::vector<std::string> kNeutralWords = {"the",  "a",     "movie", "film", "was",    "is",   "it",
                                                "and",  "plot",  "actor", "scene", "story", "this", "that",
                                                "very", "really", "just", "so",    "of",    "to"};
const std::vector<std::string> kPositiveWords = {"good", "great", "excellent", "love", "wonderful", "amazing"};
const std::vector<std::string> kNegativeWords = {"bad", "awful", "terrible", "hate", "boring", "poor"};

// Class mean directions for one modality: num_classes unit vectors scaled
// by the separation.
std::vector<std::vector<double>> class_means(Rng& rng, std::size_t classes, std::size_t width, double separation,
                                             bool signal) {
  std::vector<std::vector<double>> means(classes, std::vector<double>(width, 0.0));
  for (auto& mean : means) {
    double norm = 0.0;
    for (double& v : mean) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : mean) v = signal && norm > 0.0 ? v / norm * separation : 0.0;
  }
  return means;
}

FeatureMatrix noisy_rows(Rng& rng, std::size_t rows, const std::vector<double>& mean, double noise) {
  FeatureMatrix m{rows, mean.size(), {}};
  m.values.reserve(rows * mean.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (double mu : mean) m.values.push_back(mu + noise * rng.normal());
  return m;
}

json matrix_to_json(const FeatureMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    rows.push_back(std::vector<double>(m.values.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
                                       m.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols)));
  }
  return rows;
}

FeatureMatrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw ContractError(std::string(field) + " must be a list of rows");
  FeatureMatrix m;
  m.rows = j.size();
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array()) throw ContractError(std::string(field) + " row " + std::to_string(r) + " is not a list");
    if (r == 0) m.cols = row.size();
    if (row.size() != m.cols) throw ContractError(std::string(field) + " rows have unequal widths");
    for (const json& v : row) {
      if (!v.is_number()) throw ContractError(std::string(field) + " contains a non-numeric value");
      m.values.push_back(v.get<double>());
    }
  }
  return m;
}

json manifest_to_json(const DatasetManifest& m) {
  return {{"samples", m.samples},
          {"language_width", m.language_width},
          {"vision_width", m.vision_width},
          {"acoustic_width", m.acoustic_width},
          {"num_classes", m.num_classes},
          {"split_sizes", m.split_sizes}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.samples = j.at("samples").get<std::size_t>();
  m.language_width = j.value("language_width", std::size_t{0});
  m.vision_width = j.at("vision_width").get<std::size_t>();
  m.acoustic_width = j.at("acoustic_width").get<std::size_t>();
  m.num_classes = j.at("num_classes").get<std::size_t>();
  m.split_sizes = j.value("split_sizes", std::vector<std::size_t>{});
  return m;
}

json sample_to_json(const UtteranceSample& s) {
  json j{{"tokens", s.tokens},
         {"vision", matrix_to_json(s.vision)},
         {"acoustic", matrix_to_json(s.acoustic)},
         {"label", s.label},
         {"score", s.score}};
  if (s.language) j["language"] = matrix_to_json(*s.language);
  return j;
}

UtteranceSample sample_from_json(const json& j) {
  UtteranceSample s;
  if (!j.is_object()) throw ContractError("record is not an object");
  s.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("language") && !j["language"].is_null()) s.language = matrix_from_json(j["language"], "language");
  s.vision = matrix_from_json(j.at("vision"), "vision");
  s.acoustic = matrix_from_json(j.at("acoustic"), "acoustic");
  const json& label = j.at("label");
  if (!label.is_number_integer() || label.get<long long>() < 0) throw ContractError("label must be a class id");
  s.label = label.get<std::size_t>();
  s.score = j.value("score", static_cast<double>(s.label));
  return s;
}

DatasetManifest infer_manifest(const std::vector<UtteranceSample>& samples) {
  DatasetManifest m;
  m.samples = samples.size();
  for (const auto& s : samples) {
    if (s.language) m.language_width = s.language->cols;
    m.vision_width = s.vision.cols;
    m.acoustic_width = s.acoustic.cols;
    m.num_classes = std::max(m.num_classes, s.label + 1);
  }
  return m;
}

}  // namespace

Lexicon synthetic_lexicon() { return Lexicon::from_words(kPositiveWords, kNegativeWords); }

std::vector<std::string> synthetic_vocabulary() {
  std::vector<std::string> vocab{"<unk>"};
  for (const auto* list : {&kNeutralWords, &kPositiveWords, &kNegativeWords}) vocab.insert(vocab.end(), list->begin(), list->end());
  return vocab;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.modality_signal.empty()) throw ConfigError("synthetic spec: modality_signal must not be empty");
  if (spec.n_samples == 0 || spec.seq_len == 0 || spec.language_width == 0 || spec.vision_width == 0 ||
      spec.acoustic_width == 0 || spec.num_classes < 2) {
    throw ConfigError("synthetic spec: sizes must be positive and num_classes >= 2");
  }
  if (!(spec.class_separation >= 0.0) || !(spec.noise >= 0.0)) {
    throw ConfigError("synthetic spec: separation and noise must be non-negative");
  }

  Rng rng(spec.seed);
  // Means are drawn for every modality so that the structure of the
  // signalled ones does not depend on which others are signalled.
  const auto mean_l = class_means(rng, spec.num_classes, spec.language_width, spec.class_separation,
                                  spec.modality_signal.has(Modality::kLanguage));
  const auto mean_v = class_means(rng, spec.num_classes, spec.vision_width, spec.class_separation,
                                  spec.modality_signal.has(Modality::kVision));
  const auto mean_a = class_means(rng, spec.num_classes, spec.acoustic_width, spec.class_separation,
                                  spec.modality_signal.has(Modality::kAcoustic));
  const bool language_polarity = spec.modality_signal.has(Modality::kLanguage) && spec.class_separation > 0.0;

  std::vector<std::size_t> labels(spec.n_samples);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % spec.num_classes;
  rng.shuffle(labels);

  Dataset ds;
  ds.samples.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    UtteranceSample s;
    s.label = labels[i];
    s.score = static_cast<double>(labels[i]);
    for (std::size_t t = 0; t < spec.seq_len; ++t) s.tokens.push_back(kNeutralWords[rng.index(kNeutralWords.size())]);
    const bool positive = language_polarity ? 2 * s.label >= spec.num_classes : rng.index(2) == 1;
    const auto& words = positive ? kPositiveWords : kNegativeWords;
    s.tokens[rng.index(spec.seq_len)] = words[rng.index(words.size())];
    s.language = noisy_rows(rng, spec.seq_len, mean_l[s.label], spec.noise);
    s.vision = noisy_rows(rng, spec.seq_len, mean_v[s.label], spec.noise);
    s.acoustic = noisy_rows(rng, spec.seq_len, mean_a[s.label], spec.noise);
    ds.samples.push_back(std::move(s));
  }
  ds.manifest = {spec.n_samples, spec.language_width, spec.vision_width, spec.acoustic_width, spec.num_classes, {}};
  return ds;
}

void validate_sample(const UtteranceSample& s, const DatasetManifest& m, std::size_t index) {
  const std::string where = "sample " + std::to_string(index) + ": ";
  const std::size_t n = s.tokens.size();
  if (n == 0) throw ValidationError(where + "no tokens");
  auto check = [&](const FeatureMatrix& f, std::size_t width, const char* name) {
    if (f.rows != n) {
      throw ValidationError(where + name + " has " + std::to_string(f.rows) + " rows but " + std::to_string(n) +
                            " tokens");
    }
    if (width != 0 && f.cols != width) {
      throw ValidationError(where + name + " width " + std::to_string(f.cols) + " differs from manifest width " +
                            std::to_string(width));
    }
    if (f.values.size() != f.rows * f.cols) throw ValidationError(where + name + " is ragged");
    for (double v : f.values) {
      if (!std::isfinite(v)) throw ValidationError(where + name + " contains a non-finite value");
    }
  };
  if (s.language) check(*s.language, m.language_width, "language");
  check(s.vision, m.vision_width, "vision");
  check(s.acoustic, m.acoustic_width, "acoustic");
  if (m.num_classes != 0 && s.label >= m.num_classes) {
    throw ValidationError(where + "label " + std::to_string(s.label) + " outside " + std::to_string(m.num_classes) +
                          " classes");
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset " + path.string());
  DatasetManifest m = dataset.manifest;
  m.samples = dataset.samples.size();
  out << json{{"manifest", manifest_to_json(m)}}.dump() << '\n';
  for (const auto& s : dataset.samples) out << sample_to_json(s).dump() << '\n';
  if (!out) throw IoError("write failed for dataset " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path.string());
  Dataset ds;
  std::optional<DatasetManifest> manifest;
  std::vector<std::size_t> sample_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (j.is_object() && j.contains("manifest")) {
      if (manifest || !ds.samples.empty()) throw ParseError(line_no, "manifest must be the first record");
      try {
        manifest = manifest_from_json(j["manifest"]);
      } catch (const json::exception& e) {
        throw ParseError(line_no, std::string("malformed manifest: ") + e.what());
      }
      continue;
    }
    try {
      ds.samples.push_back(sample_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(line_no, "sample " + std::to_string(ds.samples.size()) + ": " + e.what());
    } catch (const ContractError& e) {
      throw ParseError(line_no, "sample " + std::to_string(ds.samples.size()) + ": " + e.what());
    }
    sample_lines.push_back(line_no);
  }

  ds.manifest = manifest ? *manifest : infer_manifest(ds.samples);
  if (ds.manifest.samples != ds.samples.size()) {
    throw ValidationError("manifest declares " + std::to_string(ds.manifest.samples) + " samples, file holds " +
                          std::to_string(ds.samples.size()));
  }
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    try {
      validate_sample(ds.samples[i], ds.manifest, i);
    } catch (const ValidationError& e) {
      throw ParseError(sample_lines[i], e.what());
    }
  }
  return ds;
}

DatasetSplits split(const Dataset& dataset, const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
  }
  if (std::fabs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) by_label[dataset.samples[i].label].push_back(i);

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (auto& [label, idx] : by_label) {
    rng.shuffle(idx);
    const double c = static_cast<double>(idx.size());
    const auto b1 = static_cast<std::size_t>(std::llround(ratios[0] * c));
    const auto b2 = std::max(b1, std::min(idx.size(), static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * c))));
    parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(b1));
    parts[1].insert(parts[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(b1),
                    idx.begin() + static_cast<std::ptrdiff_t>(b2));
    parts[2].insert(parts[2].end(), idx.begin() + static_cast<std::ptrdiff_t>(b2), idx.end());
  }

  std::array<Dataset, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    std::sort(parts[k].begin(), parts[k].end());
    out[k].manifest = dataset.manifest;
    out[k].manifest.samples = parts[k].size();
    out[k].manifest.split_sizes = {parts[0].size(), parts[1].size(), parts[2].size()};
    for (std::size_t i : parts[k]) out[k].samples.push_back(dataset.samples[i]);
  }
  return {std::move(out[0]), std::move(out[1]), std::move(out[2])};
}

}  // namespace magcn
