#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "magcn/embeddings.hpp"
#include "magcn/modality.hpp"

namespace magcn {

/// Row-major feature block of one modality.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool operator==(const FeatureMatrix&) const = default;
};

struct UtteranceSample {
  std::vector<std::string> tokens;
  std::optional<FeatureMatrix> language;  // pre-extracted word vectors
  FeatureMatrix vision;
  FeatureMatrix acoustic;
  std::size_t label = 0;
  double score = 0.0;  // raw sentiment score carried alongside the class

  std::size_t length() const { return tokens.size(); }
  bool operator==(const UtteranceSample&) const = default;
};

struct DatasetManifest {
  std::size_t samples = 0;
  std::size_t language_width = 0;
  std::size_t vision_width = 0;
  std::size_t acoustic_width = 0;
  std::size_t num_classes = 0;
  std::vector<std::size_t> split_sizes;  // train/val/test when known

  bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<UtteranceSample> samples;

  bool operator==(const Dataset&) const = default;
};

struct SyntheticSpec {
  std::size_t n_samples = 200;
  std::size_t seq_len = 8;
  std::size_t language_width = 16;
  std::size_t vision_width = 8;
  std::size_t acoustic_width = 8;
  std::size_t num_classes = 2;
  double class_separation = 1.5;
  double noise = 1.0;
  ModalitySet modality_signal = ModalitySet::all();
  std::uint64_t seed = 1;

  bool operator==(const SyntheticSpec&) const = default;
};

/// Lexicon containing the sentiment words the generator plants.
Lexicon synthetic_lexicon();
/// Every token the generator can emit, index 0 being "<unk>".
std::vector<std::string> synthetic_vocabulary();

/// Deterministic dataset. Each class of each modality in modality_signal
/// gets its own mean direction of length class_separation; other
/// modalities are pure noise. One lexicon word is planted per utterance,
/// with class-matched polarity only when language carries signal.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Line-delimited JSON: a manifest record, then one sample per line.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Per-sample consistency checks; throws ValidationError naming the sample.
void validate_sample(const UtteranceSample& sample, const DatasetManifest& manifest, std::size_t index);

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Stratified by label, disjoint, exhaustive and deterministic for a seed.
DatasetSplits split(const Dataset& dataset, const std::array<double, 3>& ratios, std::uint64_t seed);

}  // namespace magcn
