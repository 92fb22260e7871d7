#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "magcn/errors.hpp"
#include "magcn/gradcheck.hpp"
#include "magcn/model.hpp"
#include "magcn/trainer.hpp"
#include "test_util.hpp"

using namespace magcn;
using magcn::testing::max_abs_diff;
using magcn::testing::permute_rows;
using magcn::testing::random_matrix;

namespace {

MagcnConfig tiny_config() {
  MagcnConfig c;
  c.d = 8;
  c.sublayers = 2;
  c.heads = 2;
  c.blocks = 1;
  c.sentiment_width = 2;
  c.language_width = 6;
  c.vision_width = 5;
  c.acoustic_width = 4;
  return c;
}

Encodings random_encodings(Rng& rng, const MagcnConfig& c, std::size_t n) {
  Encodings e;
  if (c.modalities.has(Modality::kLanguage)) e.h_l = random_matrix(rng, n, c.d, -1, 1);
  if (c.modalities.has(Modality::kVision)) e.h_v = random_matrix(rng, n, c.d, -1, 1);
  if (c.modalities.has(Modality::kAcoustic)) e.h_a = random_matrix(rng, n, c.d, -1, 1);
  e.sentiment = random_matrix(rng, n, c.effective_sentiment_width(), -1, 1);
  return e;
}

ModelInput random_input(Rng& rng, const MagcnConfig& c, std::size_t n) {
  ModelInput in;
  if (c.modalities.has(Modality::kLanguage)) {
    in.language = random_matrix(rng, n, c.language_width);
    for (std::size_t i = 0; i < n; ++i) in.flags.push_back(i % 2);
  }
  if (c.modalities.has(Modality::kVision)) in.vision = random_matrix(rng, n, c.vision_width);
  if (c.modalities.has(Modality::kAcoustic)) in.acoustic = random_matrix(rng, n, c.acoustic_width);
  return in;
}

void zero_all(MagcnModel& m) {
  for (auto& [name, t] : m.params().items()) {
    Tensor handle = t;
    std::fill(handle.mutable_data().begin(), handle.mutable_data().end(), 0.0);
  }
}

void expect_probability_vector(const Tensor& p) {
  double s = 0.0;
  for (double v : p.data()) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

}  // namespace

TEST(Config, ValidationRejectsBadShapes) {
  MagcnConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.d = 9;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.sublayers = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.sentiment_width = 1;  // tower width 9 with 2 heads
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, AnchorRouting) {
  MagcnConfig c = tiny_config();
  EXPECT_EQ(c.anchor(), Modality::kLanguage);
  EXPECT_EQ(c.tower_modalities(), (std::vector<Modality>{Modality::kVision, Modality::kAcoustic}));
  c.modalities = ModalitySet::parse("A+V");
  EXPECT_EQ(c.anchor(), Modality::kVision);
  EXPECT_EQ(c.tower_modalities(), (std::vector<Modality>{Modality::kAcoustic}));
  c.modalities = ModalitySet::parse("L");
  EXPECT_TRUE(c.tower_modalities().empty());
}

TEST(Modalities, GridHasSevenColumnsInOrder) {
  std::vector<std::string> names;
  for (const auto& s : modality_grid()) names.push_back(s.str());
  EXPECT_EQ(names, (std::vector<std::string>{"V", "A", "L", "A+V", "L+V", "L+A", "L+V+A"}));
  EXPECT_EQ(ModalitySet::parse("V+L").str(), "L+V");
  EXPECT_THROW(ModalitySet::parse("L+X"), ConfigError);
  EXPECT_THROW(ModalitySet::parse(""), ConfigError);
}

TEST(ConsistencyLoss, ZeroWhenBimodalOutputsCoincide) {
  Rng rng(1);
  const Tensor hl = random_matrix(rng, 4, 3), hs = random_matrix(rng, 4, 3);
  EXPECT_EQ(consistency_loss(hl, hs, hs).item(), 0.0);
}

TEST(ConsistencyLoss, ScalarHandCase) {
  const Tensor lc = consistency_loss(Tensor::matrix({{1}}), Tensor::matrix({{1}}), Tensor::matrix({{-1}}));
  EXPECT_EQ(lc.item(), 4.0);
}

TEST(ConsistencyLoss, NonNegativeAndRowScaleInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(5), d = 1 + rng.index(4);
    const Tensor hl = random_matrix(rng, n, d), lv = random_matrix(rng, n, d), la = random_matrix(rng, n, d);
    const double base = consistency_loss(hl, lv, la).item();
    EXPECT_GE(base, 0.0);
    auto rescale = [&](const Tensor& t) {
      std::vector<double> v(t.data().begin(), t.data().end());
      for (std::size_t r = 0; r < n; ++r) {
        const double lambda = rng.uniform(0.1, 10.0);
        for (std::size_t c = 0; c < d; ++c) v[r * d + c] *= lambda;
      }
      return Tensor::matrix(n, d, v);
    };
    EXPECT_NEAR(consistency_loss(rescale(hl), rescale(lv), rescale(la)).item(), base, 1e-12 * (1.0 + base));
  }
}

TEST(ConsistencyLoss, BimodalShapeMismatchThrows) {
  EXPECT_THROW(consistency_loss(Tensor::zeros({2, 2}), Tensor::zeros({2, 2}), Tensor::zeros({2, 3})),
               DimensionError);
}

TEST(Predict, ZeroHeadGivesUniform) {
  const std::vector<Tensor> reps{Tensor::matrix({{1, 2}, {3, 4}})};
  const Tensor p = predict(reps, Tensor::zeros({2, 3}), Tensor::zeros({3}));
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Predict, SingleRowPoolingIsIdentity) {
  const std::vector<Tensor> reps{Tensor::matrix({{1, 2}}), Tensor::matrix({{3}})};
  Tensor pooled;
  predict(reps, Tensor::zeros({3, 2}), Tensor::zeros({2}), &pooled);
  EXPECT_EQ(std::vector<double>(pooled.data().begin(), pooled.data().end()), (std::vector<double>{1, 2, 3}));
}

TEST(Predict, HandSetTwoClassHead) {
  // pooled = [1, 2]; logits = [1*1 + 2*0, 1*0 + 2*1] + [0, -1] = [1, 1] -> uniform.
  const std::vector<Tensor> reps{Tensor::matrix({{0, 1}, {2, 3}})};
  const Tensor p = predict(reps, Tensor::matrix({{1, 0}, {0, 1}}), Tensor(Shape{2}, {0, -1}));
  EXPECT_NEAR(p.at(0), 0.5, 1e-15);
  // Shift the bias: logits [1, 2] -> [1/(1+e), e/(1+e)].
  const Tensor q = predict(reps, Tensor::matrix({{1, 0}, {0, 1}}), Tensor(Shape{2}, {0, 0}));
  EXPECT_NEAR(q.at(1), std::exp(1.0) / (1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(expected_class(q).item(), q.at(1), 1e-15);
}

TEST(TotalLoss, PerfectPredictionsWithoutConsistency) {
  const std::vector<Tensor> scores{Tensor::scalar(1.0), Tensor::scalar(0.0)};
  const std::vector<double> targets{1.0, 0.0};
  EXPECT_EQ(total_loss(scores, targets, Tensor::scalar(0.7), 1.0, 0.0).item(), 0.0);
}

TEST(TotalLoss, AlphaZeroLeavesConsistencyTerm) {
  const std::vector<Tensor> scores{Tensor::scalar(0.3)};
  const std::vector<double> targets{1.0};
  EXPECT_DOUBLE_EQ(total_loss(scores, targets, Tensor::scalar(0.7), 0.0, 2.0).item(), 1.4);
}

TEST(TotalLoss, HandArithmetic) {
  const std::vector<Tensor> scores{Tensor::scalar(0.5), Tensor::scalar(1.5)};
  const std::vector<double> targets{0.0, 0.0};
  EXPECT_DOUBLE_EQ(total_loss(scores, targets, Tensor::scalar(0.25), 1.0, 2.0).item(), 1.5);
}

TEST(TotalLoss, EmptyBatchIsContractError) {
  EXPECT_THROW(total_loss({}, {}, Tensor(), 1.0, 1.0), ContractError);
}

TEST(InterModality, ZeroWidthSentimentSkipsConcat) {
  Rng rng(3);
  MagcnConfig c = tiny_config();
  c.use_sentiment_embedding = false;
  const MagcnModel m(c, 1);
  const TowerParams& t = *m.tower(Modality::kVision);
  const Tensor hl = random_matrix(rng, 3, 8), hv = random_matrix(rng, 3, 8);
  Tensor fused;
  const Tensor out = inter_modality_forward(hl, hv, Tensor::zeros({3, 0}), t, nullptr, nullptr, &fused);
  EXPECT_LT(max_abs_diff(out, mha_self(fused, t.mha)), 1e-15);
  EXPECT_EQ(out.shape(), (Shape{3, 8}));
}

TEST(InterModality, ZeroWeightsGiveZeroOutput) {
  Rng rng(4);
  MagcnModel m(tiny_config(), 2);
  zero_all(m);
  const Tensor out = inter_modality_forward(random_matrix(rng, 3, 8), random_matrix(rng, 3, 8),
                                            random_matrix(rng, 3, 2), *m.tower(Modality::kAcoustic));
  EXPECT_EQ(out.shape(), (Shape{3, 10}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(InterModality, ComposesItsStages) {
  Rng rng(5);
  const MagcnModel m(tiny_config(), 3);
  const TowerParams& t = *m.tower(Modality::kVision);
  const Tensor hl = random_matrix(rng, 4, 8), hv = random_matrix(rng, 4, 8), s = random_matrix(rng, 4, 2);
  const Tensor a = affinity(hl, hv, t.affinity);
  const Tensor expected = mha_self(concat_cols({dcgcn_forward(a, hv, t.graph.dense_params), s}), t.mha);
  EXPECT_LT(max_abs_diff(inter_modality_forward(hl, hv, s, t), expected), 1e-15);
  EXPECT_THROW(inter_modality_forward(hl, random_matrix(rng, 3, 8), s, t), AlignmentError);
}

TEST(LanguageTower, TwoBlocksComposeSingleBlocks) {
  Rng rng(6);
  MagcnConfig c = tiny_config();
  c.blocks = 2;
  const MagcnModel m(c, 4);
  const Tensor hl = random_matrix(rng, 5, 8);
  const auto& blocks = m.language_blocks();
  const Tensor once = unimodal_language_forward(hl, std::span(blocks.data(), 1));
  const Tensor twice = unimodal_language_forward(once, std::span(blocks.data() + 1, 1));
  EXPECT_LT(max_abs_diff(unimodal_language_forward(hl, blocks), twice), 1e-15);
}

TEST(LanguageTower, ZeroInputUsesUniformGraphsAndBiases) {
  MagcnConfig c = tiny_config();
  c.blocks = 1;
  MagcnModel m(c, 5);
  const Tensor y = unimodal_language_forward(Tensor::zeros({4, 8}), m.language_blocks());
  // Uniform graphs over zero features: every row is the same bias-driven vector.
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(y.at(r, j), y.at(0, j));
}

TEST(Forward, AllZeroParametersGiveUniformProbsAndNoConsistency) {
  Rng rng(7);
  MagcnModel m(tiny_config(), 6);
  zero_all(m);
  const ForwardTrace tr = magcn_forward(random_input(rng, m.config(), 4), m);
  for (double v : tr.probs.data()) EXPECT_EQ(v, 0.5);
  ASSERT_TRUE(tr.consistency.defined());
  EXPECT_EQ(tr.consistency.item(), 0.0);
}

TEST(Forward, TraceShapes) {
  Rng rng(8);
  const MagcnModel m(tiny_config(), 7);
  const ForwardTrace tr = magcn_forward(random_input(rng, m.config(), 5), m);
  EXPECT_EQ(tr.x_l.shape(), (Shape{5, 8}));
  EXPECT_EQ(tr.h_l.shape(), (Shape{5, 8}));
  EXPECT_EQ(tr.a_lv.shape(), (Shape{5, 5}));
  EXPECT_EQ(tr.h_lv.shape(), (Shape{5, 8}));
  EXPECT_EQ(tr.hs_la.shape(), (Shape{5, 10}));
  EXPECT_EQ(tr.hs_lv_out.shape(), (Shape{5, 10}));
  EXPECT_EQ(tr.h_l_out.shape(), (Shape{5, 8}));
  EXPECT_EQ(tr.pooled.shape(), (Shape{1, 28}));
  EXPECT_EQ(tr.probs.shape(), (Shape{2}));
  EXPECT_EQ(tr.score.rank(), 0u);
}

TEST(Forward, ProbsAreStochasticForRandomParameters) {
  Rng rng(9);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MagcnConfig c = tiny_config();
    c.num_classes = 2 + seed % 3;
    const MagcnModel m(c, seed);
    expect_probability_vector(magcn_forward(random_input(rng, c, 1 + rng.index(6)), m).probs);
  }
}

TEST(Forward, JointRowPermutationLeavesProbsUnchanged) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const MagcnModel m(tiny_config(), static_cast<std::uint64_t>(trial));
    const std::size_t n = 1 + rng.index(6);
    const Encodings e = random_encodings(rng, m.config(), n);
    const auto perm = magcn::testing::random_permutation(rng, n);
    Encodings p;
    p.h_l = permute_rows(e.h_l, perm);
    p.h_v = permute_rows(e.h_v, perm);
    p.h_a = permute_rows(e.h_a, perm);
    p.sentiment = permute_rows(e.sentiment, perm);
    EXPECT_LT(max_abs_diff(forward_from_encodings(e, m).probs, forward_from_encodings(p, m).probs), 1e-12);
  }
}

TEST(Forward, LanguageOnlySkipsTowers) {
  Rng rng(11);
  MagcnConfig c = tiny_config();
  c.modalities = ModalitySet::parse("L");
  const MagcnModel m(c, 8);
  EXPECT_EQ(m.tower(Modality::kVision), nullptr);
  EXPECT_EQ(m.tower(Modality::kAcoustic), nullptr);
  ModelInput in = random_input(rng, c, 3);
  const ForwardTrace tr = magcn_forward(in, m);
  EXPECT_FALSE(tr.hs_lv_out.defined());
  EXPECT_FALSE(tr.consistency.defined());
  EXPECT_EQ(tr.pooled.shape(), (Shape{1, 8}));
}

TEST(Forward, VisionAnchorWithoutLanguage) {
  Rng rng(12);
  MagcnConfig c = tiny_config();
  c.modalities = ModalitySet::parse("A+V");
  const MagcnModel m(c, 9);
  EXPECT_FALSE(m.sentiment().has_value());
  const ForwardTrace tr = magcn_forward(random_input(rng, c, 4), m);
  EXPECT_TRUE(tr.hs_la_out.defined());
  EXPECT_EQ(tr.hs_la_out.shape(), (Shape{4, 8}));
  expect_probability_vector(tr.probs);
}

TEST(Forward, VanillaGcnKeepsShapes) {
  Rng rng(13);
  MagcnConfig c = tiny_config();
  c.use_dense_gcn = false;
  const MagcnModel m(c, 10);
  EXPECT_FALSE(m.tower(Modality::kVision)->graph.dense);
  const ForwardTrace tr = magcn_forward(random_input(rng, c, 4), m);
  EXPECT_EQ(tr.h_lv.shape(), (Shape{4, 8}));
  EXPECT_EQ(tr.hs_lv_out.shape(), (Shape{4, 10}));
  EXPECT_EQ(tr.h_l_out.shape(), (Shape{4, 8}));
  expect_probability_vector(tr.probs);
}

TEST(Forward, MisalignedModalityRejected) {
  Rng rng(14);
  const MagcnModel m(tiny_config(), 11);
  ModelInput in = random_input(rng, m.config(), 4);
  in.vision = random_matrix(rng, 3, 5);
  EXPECT_THROW(magcn_forward(in, m), AlignmentError);
}

TEST(Forward, FullModelGradcheck) {
  MagcnConfig c = tiny_config();
  const GradcheckReport r = model_gradcheck(c, 4, 21);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  std::set<std::string> checked;
  for (const auto& e : r.entries) checked.insert(e.name);
  const MagcnModel m(c, 21);
  EXPECT_EQ(checked.size(), m.params().size());
}

TEST(Forward, CrossEntropyVariantGradcheck) {
  MagcnConfig c = tiny_config();
  c.loss = LossKind::kCrossEntropy;
  c.num_classes = 3;
  EXPECT_TRUE(model_gradcheck(c, 3, 22).passed);
}

TEST(BatchLoss, PredictedClassBreaksTiesLow) {
  ForwardTrace tr;
  tr.probs = Tensor::vector({0.4, 0.4, 0.2});
  EXPECT_EQ(predicted_class(tr), 0u);
  tr.probs = Tensor::vector({0.2, 0.4, 0.4});
  EXPECT_EQ(predicted_class(tr), 1u);
}

TEST(BatchLoss, ConsistencyTermIsBetaTimesMean) {
  Rng rng(15);
  MagcnConfig c = tiny_config();
  c.beta = 0.5;
  const MagcnModel m(c, 12);
  std::vector<ForwardTrace> traces;
  for (int i = 0; i < 3; ++i) traces.push_back(magcn_forward(random_input(rng, c, 4), m));
  const std::vector<std::size_t> labels{0, 1, 1};
  const BatchLoss bl = batch_loss(traces, labels, c);
  double mean_lc = 0.0;
  for (const auto& t : traces) mean_lc += t.consistency.item() / 3.0;
  EXPECT_NEAR(bl.consistency_term, 0.5 * mean_lc, 1e-15);
  EXPECT_NEAR(bl.total.item(), bl.prediction_term + bl.consistency_term, 1e-15);
}
