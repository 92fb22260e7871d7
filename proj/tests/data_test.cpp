#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "magcn/data.hpp"
#include "magcn/errors.hpp"

using namespace magcn;

namespace {

const std::filesystem::path kFixtures = MAGCN_FIXTURE_DIR;

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("magcn_data_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> pooled(const FeatureMatrix& m) {
  std::vector<double> v(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) v[c] += m.at(r, c) / static_cast<double>(m.rows);
  return v;
}

// Nearest-class-mean probe: fit on the first half, score on the second.
double probe_accuracy(const Dataset& ds, const FeatureMatrix& (*pick)(const UtteranceSample&)) {
  const std::size_t half = ds.samples.size() / 2;
  std::map<std::size_t, std::pair<std::vector<double>, std::size_t>> means;
  for (std::size_t i = 0; i < half; ++i) {
    const auto v = pooled(pick(ds.samples[i]));
    auto& [sum, count] = means[ds.samples[i].label];
    if (sum.empty()) sum.assign(v.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) sum[k] += v[k];
    ++count;
  }
  std::size_t correct = 0;
  for (std::size_t i = half; i < ds.samples.size(); ++i) {
    const auto v = pooled(pick(ds.samples[i]));
    double best = INFINITY;
    std::size_t best_label = 0;
    for (const auto& [label, mc] : means) {
      double dist = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double diff = v[k] - mc.first[k] / static_cast<double>(mc.second);
        dist += diff * diff;
      }
      if (dist < best) best = dist, best_label = label;
    }
    correct += best_label == ds.samples[i].label;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.samples.size() - half);
}

const FeatureMatrix& language_of(const UtteranceSample& s) { return *s.language; }
const FeatureMatrix& vision_of(const UtteranceSample& s) { return s.vision; }

}  // namespace

TEST(Synthetic, SameSeedSameBytes) {
  SyntheticSpec spec;
  spec.n_samples = 40;
  save_dataset(generate_synthetic(spec), temp_file("a.jsonl"));
  save_dataset(generate_synthetic(spec), temp_file("b.jsonl"));
  EXPECT_EQ(slurp(temp_file("a.jsonl")), slurp(temp_file("b.jsonl")));
  spec.seed = 2;
  save_dataset(generate_synthetic(spec), temp_file("c.jsonl"));
  EXPECT_NE(slurp(temp_file("a.jsonl")), slurp(temp_file("c.jsonl")));
}

TEST(Synthetic, DefaultSpecIsBalancedFiniteAndAligned) {
  const Dataset ds = generate_synthetic(SyntheticSpec{});
  ASSERT_EQ(ds.samples.size(), 200u);
  std::map<std::size_t, int> counts;
  const Lexicon lex = synthetic_lexicon();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    ++counts[s.label];
    EXPECT_NO_THROW(validate_sample(s, ds.manifest, i));
    int planted = 0;
    for (const auto& t : s.tokens) planted += lex.contains(t);
    EXPECT_GE(planted, 1);
  }
  EXPECT_LE(std::abs(counts[0] - counts[1]), 1);
}

TEST(Synthetic, LanguagePolarityFollowsLabelOnlyWithLanguageSignal) {
  SyntheticSpec spec;
  spec.n_samples = 100;
  const Lexicon lex = synthetic_lexicon();
  auto agreement = [&](const Dataset& ds) {
    int agree = 0;
    for (const auto& s : ds.samples)
      for (const auto& t : s.tokens)
        if (lex.contains(t)) agree += (lex.polarity(t) == Polarity::kPositive) == (s.label == 1);
    return agree;
  };
  EXPECT_EQ(agreement(generate_synthetic(spec)), 100);
  spec.modality_signal = ModalitySet::parse("V");
  const int chance = agreement(generate_synthetic(spec));
  EXPECT_GT(chance, 30);
  EXPECT_LT(chance, 70);
}

TEST(Synthetic, VisionSignalOnlyLinearProbe) {
  SyntheticSpec spec;
  spec.n_samples = 1000;
  spec.modality_signal = ModalitySet::parse("V");
  spec.seed = 5;
  const Dataset ds = generate_synthetic(spec);
  EXPECT_NEAR(probe_accuracy(ds, language_of), 0.5, 0.05);
  EXPECT_GT(probe_accuracy(ds, vision_of), 0.9);
}

TEST(Synthetic, ZeroSeparationIsChance) {
  SyntheticSpec spec;
  spec.n_samples = 1000;
  spec.class_separation = 0.0;
  const Dataset ds = generate_synthetic(spec);
  EXPECT_NEAR(probe_accuracy(ds, language_of), 0.5, 0.05);
  EXPECT_NEAR(probe_accuracy(ds, vision_of), 0.5, 0.05);
}

TEST(Synthetic, EmptySignalRejected) {
  SyntheticSpec spec;
  spec.modality_signal = ModalitySet();
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
}

TEST(Loader, RoundTripsGeneratedData) {
  SyntheticSpec spec;
  spec.n_samples = 25;
  const Dataset ds = generate_synthetic(spec);
  save_dataset(ds, temp_file("rt.jsonl"));
  EXPECT_EQ(load_dataset(temp_file("rt.jsonl")), ds);
}

TEST(Loader, FiveSampleFixture) {
  const Dataset ds = load_dataset(kFixtures / "five_samples.jsonl");
  ASSERT_EQ(ds.samples.size(), 5u);
  EXPECT_EQ(ds.manifest.samples, 5u);
  EXPECT_EQ(ds.manifest.vision_width, 2u);
  EXPECT_EQ(ds.samples[0].tokens, (std::vector<std::string>{"a", "great", "film"}));
  EXPECT_EQ(ds.samples[0].vision.at(1, 1), -0.5);
  EXPECT_EQ(ds.samples[3].acoustic.at(0, 1), -0.75);
  EXPECT_EQ(ds.samples[4].label, 0u);
  EXPECT_DOUBLE_EQ(ds.samples[1].score, -1.8);
  EXPECT_FALSE(ds.samples[2].language.has_value());

  save_dataset(ds, temp_file("five.jsonl"));
  EXPECT_EQ(load_dataset(temp_file("five.jsonl")), ds);
}

TEST(Loader, EmptyFileIsEmptyDataset) {
  const Dataset ds = load_dataset(kFixtures / "empty.jsonl");
  EXPECT_TRUE(ds.samples.empty());
  EXPECT_EQ(ds.manifest.samples, 0u);
}

TEST(Loader, RowMismatchNamesSample) {
  try {
    load_dataset(kFixtures / "vision_rows_mismatch.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("sample 2"), std::string::npos) << e.what();
  }
}

TEST(Loader, MalformedRecordReportsLine) {
  try {
    load_dataset(kFixtures / "malformed_json.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Loader, ManifestCountMismatchIsValidationError) {
  EXPECT_THROW(load_dataset(kFixtures / "manifest_count_mismatch.jsonl"), ValidationError);
}

TEST(Loader, MissingFileIsIoError) { EXPECT_THROW(load_dataset("/nonexistent/data.jsonl"), IoError); }

TEST(Split, EverythingToTrain) {
  SyntheticSpec spec;
  spec.n_samples = 30;
  const Dataset ds = generate_synthetic(spec);
  const DatasetSplits s = split(ds, {1.0, 0.0, 0.0}, 3);
  EXPECT_EQ(s.train.samples.size(), 30u);
  EXPECT_TRUE(s.val.samples.empty());
  EXPECT_TRUE(s.test.samples.empty());
}

TEST(Split, StratifiedCounts) {
  SyntheticSpec spec;
  spec.n_samples = 100;
  const Dataset ds = generate_synthetic(spec);
  const DatasetSplits s = split(ds, {0.8, 0.1, 0.1}, 9);
  EXPECT_EQ(s.train.samples.size(), 80u);
  EXPECT_EQ(s.val.samples.size(), 10u);
  EXPECT_EQ(s.test.samples.size(), 10u);
  for (const Dataset* part : {&s.train, &s.val, &s.test}) {
    std::size_t ones = 0;
    for (const auto& x : part->samples) ones += x.label;
    EXPECT_EQ(2 * ones, part->samples.size());
  }
  EXPECT_EQ(s.test.manifest.split_sizes, (std::vector<std::size_t>{80, 10, 10}));
}

TEST(Split, DisjointExhaustiveDeterministic) {
  SyntheticSpec spec;
  spec.n_samples = 57;
  spec.num_classes = 3;
  const Dataset ds = generate_synthetic(spec);
  const DatasetSplits a = split(ds, {0.6, 0.2, 0.2}, 4);
  const DatasetSplits b = split(ds, {0.6, 0.2, 0.2}, 4);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  // Samples carry distinct feature values, so vision matrices identify them.
  std::multiset<std::vector<double>> seen;
  for (const Dataset* part : {&a.train, &a.val, &a.test})
    for (const auto& x : part->samples) seen.insert(x.vision.values);
  std::multiset<std::vector<double>> all;
  for (const auto& x : ds.samples) all.insert(x.vision.values);
  EXPECT_EQ(seen, all);
}

TEST(Split, RatiosMustSumToOne) {
  const Dataset ds = generate_synthetic(SyntheticSpec{});
  EXPECT_THROW(split(ds, {0.5, 0.2, 0.2}, 1), ConfigError);
  EXPECT_THROW(split(ds, {1.2, -0.1, -0.1}, 1), ConfigError);
}
