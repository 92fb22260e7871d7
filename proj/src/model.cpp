#include "magcn/model.hpp"

#include <algorithm>
#include <cmath>

#include "magcn/errors.hpp"

namespace magcn {

// ---- config -----------------------------------------------------------------

void MagcnConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (d < 2 || d % 2 != 0) fail("d must be a positive even width (split across two LSTM directions)");
  if (sublayers == 0 || d % sublayers != 0) fail("d must be divisible by the sublayer count L");
  if (heads == 0 || d % heads != 0) fail("d must be divisible by the head count M");
  if (blocks == 0) fail("the language tower needs at least one block (Z >= 1)");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    fail("alpha and beta must be finite and non-negative");
  }
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (modalities.empty()) fail("at least one modality must be enabled");
  if (modalities.has(Modality::kLanguage) && language_width == 0) fail("language width must be positive");
  if (modalities.has(Modality::kVision) && vision_width == 0) fail("vision width must be positive");
  if (modalities.has(Modality::kAcoustic) && acoustic_width == 0) fail("acoustic width must be positive");
  if (!tower_modalities().empty() && tower_width() % heads != 0) {
    fail("tower width d + d_s = " + std::to_string(tower_width()) + " must be divisible by the head count M");
  }
}

Modality MagcnConfig::anchor() const {
  if (modalities.has(Modality::kLanguage)) return Modality::kLanguage;
  if (modalities.has(Modality::kVision)) return Modality::kVision;
  return Modality::kAcoustic;
}

std::vector<Modality> MagcnConfig::tower_modalities() const {
  std::vector<Modality> out;
  const Modality a = anchor();
  for (Modality m : {Modality::kVision, Modality::kAcoustic}) {
    if (m != a && modalities.has(m)) out.push_back(m);
  }
  return out;
}

std::size_t MagcnConfig::tower_width() const { return d + effective_sentiment_width(); }

// ---- graph blocks -------------------------------------------------------------

namespace {

GraphBlock make_graph_block(ParamStore& store, const std::string& prefix, const MagcnConfig& cfg, Rng& rng,
                            bool output_linear) {
  GraphBlock block;
  block.dense = cfg.use_dense_gcn;
  if (block.dense) {
    block.dense_params = DcgcnParams::create(store, prefix + ".dcgcn", cfg.d, cfg.sublayers, rng, output_linear);
  } else {
    block.vanilla_params = GcnParams::create(store, prefix + ".gcn", cfg.d, cfg.sublayers, rng);
    if (output_linear) {
      block.out_weight = store.add_xavier(prefix + ".gcn.W_lin", cfg.d, cfg.d, rng);
      block.out_bias = store.add_constant(prefix + ".gcn.b_lin", {cfg.d}, 0.0);
    }
  }
  return block;
}

Tensor apply_block_linear(const GraphBlock& block, const Tensor& body) {
  if (block.dense) {
    if (!block.dense_params.has_output_linear()) throw ConfigError("graph block has no output linear");
    return add_bias(matmul(body, block.dense_params.out_weight), block.dense_params.out_bias);
  }
  if (!block.out_weight.defined()) throw ConfigError("graph block has no output linear");
  return add_bias(matmul(body, block.out_weight), block.out_bias);
}

}  // namespace

Tensor GraphBlock::body(const Tensor& graph, const Tensor& x) const {
  return dense ? dcgcn_body(graph, x, dense_params) : vanilla_gcn_forward(graph, x, vanilla_params);
}

Tensor GraphBlock::forward(const Tensor& graph, const Tensor& x) const {
  return dense ? dcgcn_forward(graph, x, dense_params) : apply_block_linear(*this, body(graph, x));
}

std::size_t GraphBlock::parameter_count() const {
  if (dense) return dense_params.parameter_count();
  std::size_t n = vanilla_params.parameter_count();
  if (out_weight.defined()) n += out_weight.numel() + out_bias.numel();
  return n;
}

// ---- model construction -------------------------------------------------------

MagcnModel::MagcnModel(MagcnConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const MagcnConfig& c = config_;
  const bool language = c.modalities.has(Modality::kLanguage);

  // The table exists whenever language is on, so the no-SE ablation can
  // show it never receives gradient.
  if (language && c.sentiment_width > 0) {
    sentiment_ = SentimentEmbedding::create(params_, "sentiment.table", c.sentiment_width, rng,
                                            c.polarity_aware_sentiment);
  }
  if (language && !c.vocabulary.empty()) {
    token_table_ = params_.add_uniform("token_embedding", {c.vocabulary.size(), c.language_width}, 0.1, rng);
    for (std::size_t i = 0; i < c.vocabulary.size(); ++i) vocab_index_.emplace_back(to_lower(c.vocabulary[i]), i);
    std::sort(vocab_index_.begin(), vocab_index_.end());
  }

  const std::size_t hidden = c.d / 2;
  for (Modality m : {Modality::kLanguage, Modality::kVision, Modality::kAcoustic}) {
    if (!c.modalities.has(m)) continue;
    const std::size_t in = m == Modality::kLanguage ? c.language_width + c.effective_sentiment_width()
                           : m == Modality::kVision ? c.vision_width
                                                    : c.acoustic_width;
    const std::string prefix = std::string("encoder.") + modality_letter(m);
    LstmParams fwd = LstmParams::create(params_, prefix + ".fwd", in, hidden, rng);
    LstmParams bwd = LstmParams::create(params_, prefix + ".bwd", in, hidden, rng);
    encoders_.emplace_back(m, std::make_pair(std::move(fwd), std::move(bwd)));
  }

  for (Modality other : c.tower_modalities()) {
    const std::string prefix = std::string("tower.") + modality_letter(other);
    TowerParams t;
    t.other = other;
    t.affinity = AffinityParams::create(params_, prefix + ".affinity", c.d, rng);
    t.graph = make_graph_block(params_, prefix, c, rng, true);
    t.mha = MhaParams::create(params_, prefix + ".mha", c.tower_width(), c.heads, rng);
    towers_.push_back(std::move(t));
  }

  for (std::size_t z = 0; z < c.blocks; ++z) {
    const std::string prefix = "language.block" + std::to_string(z + 1);
    LanguageBlock b;
    b.graphs = HeadProjections::create(params_, prefix + ".graphs", c.d, c.heads, rng);
    for (std::size_t t = 0; t < c.heads; ++t) {
      b.convs.push_back(make_graph_block(params_, prefix + ".head" + std::to_string(t + 1), c, rng, false));
    }
    b.w_out = params_.add_xavier(prefix + ".W_out", c.d * c.heads, c.d, rng);
    b.b_out = params_.add_constant(prefix + ".b_out", {c.d}, 0.0);
    language_blocks_.push_back(std::move(b));
  }

  if (towers_.size() == 2 && c.tower_width() != c.d) {
    consistency_projection_ = params_.add_xavier("consistency.projection", c.tower_width(), c.d, rng);
  }

  const std::size_t features = c.d + towers_.size() * c.tower_width();
  head_weight_ = params_.add_xavier("head.W", features, c.num_classes, rng);
  head_bias_ = params_.add_constant("head.b", {c.num_classes}, 0.0);
}

const LstmParams& MagcnModel::encoder(Modality m, bool backward) const {
  for (const auto& [mod, pair] : encoders_) {
    if (mod == m) return backward ? pair.second : pair.first;
  }
  throw ContractError(std::string("no encoder for modality ") + modality_letter(m));
}

const TowerParams* MagcnModel::tower(Modality other) const {
  for (const auto& t : towers_) {
    if (t.other == other) return &t;
  }
  return nullptr;
}

std::size_t MagcnModel::token_id(const std::string& token) const {
  const std::string key = to_lower(token);
  const auto it = std::lower_bound(vocab_index_.begin(), vocab_index_.end(), std::make_pair(key, std::size_t{0}));
  if (it != vocab_index_.end() && it->first == key) return it->second;
  return 0;
}

// ---- forward pieces -------------------------------------------------------------

std::size_t ModelInput::length() const {
  if (language.defined()) return language.rows();
  if (!token_ids.empty()) return token_ids.size();
  if (vision.defined()) return vision.rows();
  if (acoustic.defined()) return acoustic.rows();
  return 0;
}

Tensor inter_modality_forward(const Tensor& h_l, const Tensor& h_other, const Tensor& sentiment,
                              const TowerParams& tower, Tensor* graph_out, Tensor* fused_body, Tensor* fused,
                              Tensor* with_sentiment) {
  const Tensor a = affinity(h_l, h_other, tower.affinity);
  const Tensor body = tower.graph.body(a, h_other);
  const Tensor h_gcn = apply_block_linear(tower.graph, body);
  Tensor hs = h_gcn;
  if (sentiment.defined() && sentiment.cols() > 0) {
    if (sentiment.rows() != h_gcn.rows()) throw AlignmentError("inter_modality_forward: sentiment rows differ");
    hs = concat_cols({h_gcn, sentiment});
  }
  if (graph_out) *graph_out = a;
  if (fused_body) *fused_body = body;
  if (fused) *fused = h_gcn;
  if (with_sentiment) *with_sentiment = hs;
  return mha_self(hs, tower.mha);
}

Tensor unimodal_language_forward(const Tensor& h_l, std::span<const LanguageBlock> blocks) {
  if (blocks.empty()) throw ConfigError("unimodal_language_forward: no blocks");
  Tensor x = h_l;
  for (const LanguageBlock& block : blocks) {
    const auto graphs = multi_head_graphs(x, block.graphs);
    if (graphs.size() != block.convs.size()) throw ConfigError("language block: graph/conv count mismatch");
    const bool dense = std::all_of(block.convs.begin(), block.convs.end(), [](const GraphBlock& g) { return g.dense; });
    if (dense) {
      std::vector<DcgcnParams> params;
      params.reserve(block.convs.size());
      for (const auto& g : block.convs) params.push_back(g.dense_params);
      x = multi_graph_dcgcn(graphs, x, params, block.w_out, block.b_out);
    } else {
      std::vector<Tensor> heads;
      for (std::size_t t = 0; t < graphs.size(); ++t) heads.push_back(block.convs[t].body(graphs[t], x));
      x = add_bias(matmul(concat_cols(heads), block.w_out), block.b_out);
    }
  }
  return x;
}

Tensor consistency_loss(const Tensor& h_l_out, const Tensor& hs_lv_out, const Tensor& hs_la_out,
                        const Tensor& projection) {
  if (hs_lv_out.shape() != hs_la_out.shape()) {
    throw DimensionError("consistency_loss: bimodal shapes differ, " + shape_str(hs_lv_out.shape()) + " vs " +
                         shape_str(hs_la_out.shape()));
  }
  Tensor lv = hs_lv_out;
  Tensor la = hs_la_out;
  if (projection.defined()) {
    lv = matmul(lv, projection);
    la = matmul(la, projection);
  }
  if (lv.cols() != h_l_out.cols() || lv.rows() != h_l_out.rows()) {
    throw DimensionError("consistency_loss: language output " + shape_str(h_l_out.shape()) +
                         " is not comparable with bimodal " + shape_str(lv.shape()));
  }
  const Tensor c_l = l2norm_rows(h_l_out);
  const Tensor c_lv = l2norm_rows(lv);
  const Tensor c_la = l2norm_rows(la);
  return frobenius_sq(sub(matmul(c_l, transpose(c_lv)), matmul(c_l, transpose(c_la))));
}

Tensor predict(std::span<const Tensor> representations, const Tensor& head_weight, const Tensor& head_bias,
               Tensor* pooled, Tensor* logits) {
  const Tensor joined = representations.size() == 1 ? representations.front() : concat_cols(representations);
  const Tensor p = mean_rows(joined);
  const Tensor z = add_bias(matmul(p, head_weight), head_bias);
  if (pooled) *pooled = p;
  if (logits) *logits = z;
  return reshape(softmax_rows(z), {z.cols()});
}

Tensor expected_class(const Tensor& probs) {
  const std::size_t c = probs.numel();
  std::vector<double> ids(c);
  for (std::size_t i = 0; i < c; ++i) ids[i] = static_cast<double>(i);
  return reshape(matmul(reshape(probs, {1, c}), Tensor::matrix(c, 1, std::move(ids))), {});
}

Tensor total_loss(std::span<const Tensor> scores, std::span<const double> targets, const Tensor& consistency,
                  double alpha, double beta) {
  if (scores.empty()) throw ContractError("total_loss: empty batch");
  if (scores.size() != targets.size()) throw ContractError("total_loss: predictions and labels differ in count");
  std::vector<Tensor> errors;
  errors.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    errors.push_back(abs(add_scalar(reshape(scores[i], {1, 1}), -targets[i])));
  }
  Tensor loss = scale(sum(concat_rows(errors)), alpha / static_cast<double>(scores.size()));
  if (consistency.defined()) loss = add(loss, scale(reshape(consistency, {}), beta));
  return loss;
}

ForwardTrace forward_from_encodings(const Encodings& enc, const MagcnModel& model) {
  const MagcnConfig& c = model.config();
  ForwardTrace tr;
  tr.h_l = enc.h_l;
  tr.h_v = enc.h_v;
  tr.h_a = enc.h_a;
  tr.sentiment = enc.sentiment;

  const Modality anchor = c.anchor();
  auto encoding = [&](Modality m) -> const Tensor& {
    const Tensor& t = m == Modality::kLanguage ? enc.h_l : m == Modality::kVision ? enc.h_v : enc.h_a;
    if (!t.defined()) throw ContractError(std::string("missing encoding for modality ") + modality_letter(m));
    return t;
  };
  const Tensor& h_anchor = encoding(anchor);
  Tensor s;
  if (anchor == Modality::kLanguage && c.effective_sentiment_width() > 0) {
    s = enc.sentiment;
    if (!s.defined() || s.cols() != c.effective_sentiment_width()) {
      throw DimensionError("forward: sentiment rows must have width " + std::to_string(c.effective_sentiment_width()));
    }
  }

  for (Modality other : c.tower_modalities()) {
    const TowerParams* tower = model.tower(other);
    const Tensor& h_other = encoding(other);
    if (h_other.rows() != h_anchor.rows()) {
      throw AlignmentError(std::string("forward: modality ") + modality_letter(other) + " has " +
                           std::to_string(h_other.rows()) + " rows, expected " + std::to_string(h_anchor.rows()));
    }
    const bool vision_slot = other == Modality::kVision;
    Tensor& a = vision_slot ? tr.a_lv : tr.a_la;
    Tensor& body = vision_slot ? tr.h_lv : tr.h_la;
    Tensor& gcn = vision_slot ? tr.h_lv_gcn : tr.h_la_gcn;
    Tensor& hs = vision_slot ? tr.hs_lv : tr.hs_la;
    Tensor& out = vision_slot ? tr.hs_lv_out : tr.hs_la_out;
    out = inter_modality_forward(h_anchor, h_other, s, *tower, &a, &body, &gcn, &hs);
  }

  tr.h_l_out = unimodal_language_forward(h_anchor, model.language_blocks());

  if (c.use_consistency_loss && tr.hs_lv_out.defined() && tr.hs_la_out.defined()) {
    tr.consistency = consistency_loss(tr.h_l_out, tr.hs_lv_out, tr.hs_la_out, model.consistency_projection());
  }

  std::vector<Tensor> reps{tr.h_l_out};
  if (tr.hs_lv_out.defined()) reps.push_back(tr.hs_lv_out);
  if (tr.hs_la_out.defined()) reps.push_back(tr.hs_la_out);
  tr.probs = predict(reps, model.head_weight(), model.head_bias(), &tr.pooled, &tr.logits);
  tr.score = expected_class(tr.probs);
  return tr;
}

ForwardTrace magcn_forward(const ModelInput& input, const MagcnModel& model) {
  const MagcnConfig& c = model.config();
  const std::size_t n = input.length();
  if (n == 0) throw ContractError("forward: empty utterance");
  Encodings enc;
  Tensor x_l;
  if (c.modalities.has(Modality::kLanguage)) {
    TokenInput tokens;
    if (input.language.defined()) {
      if (input.language.cols() != c.language_width) {
        throw DimensionError("forward: language vectors " + shape_str(input.language.shape()) + ", expected width " +
                             std::to_string(c.language_width));
      }
      tokens.source = input.language;
    } else {
      if (!model.token_table().defined()) throw ContractError("forward: no language vectors and no vocabulary");
      tokens.source = TokenIds{input.token_ids, model.token_table()};
    }
    const SentimentEmbedding* se =
        c.effective_sentiment_width() > 0 && model.sentiment() ? &*model.sentiment() : nullptr;
    const LanguageInput li = build_language_input(tokens, input.flags, se);
    x_l = li.x_l;
    enc.sentiment = li.sentiment;
    enc.h_l = bilstm(x_l, model.encoder(Modality::kLanguage, false), model.encoder(Modality::kLanguage, true));
  }
  auto encode = [&](Modality m, const Tensor& x) {
    if (!c.modalities.has(m)) return Tensor();
    if (!x.defined()) throw ContractError(std::string("forward: sample lacks modality ") + modality_letter(m));
    if (x.rows() != n) {
      throw AlignmentError(std::string("forward: modality ") + modality_letter(m) + " has " +
                           std::to_string(x.rows()) + " rows, expected " + std::to_string(n));
    }
    return bilstm(x, model.encoder(m, false), model.encoder(m, true));
  };
  enc.h_v = encode(Modality::kVision, input.vision);
  enc.h_a = encode(Modality::kAcoustic, input.acoustic);

  ForwardTrace tr = forward_from_encodings(enc, model);
  tr.x_l = x_l;
  return tr;
}

BatchLoss batch_loss(std::span<const ForwardTrace> traces, std::span<const std::size_t> labels,
                     const MagcnConfig& config) {
  if (traces.empty()) throw ContractError("batch_loss: empty batch");
  if (traces.size() != labels.size()) throw ContractError("batch_loss: traces and labels differ in count");
  const double inv_n = 1.0 / static_cast<double>(traces.size());

  Tensor consistency;
  std::vector<Tensor> lcs;
  for (const auto& tr : traces) {
    if (tr.consistency.defined()) lcs.push_back(reshape(tr.consistency, {1, 1}));
  }
  if (!lcs.empty()) consistency = scale(sum(concat_rows(lcs)), inv_n);

  BatchLoss out;
  if (config.loss == LossKind::kAbsoluteError) {
    std::vector<Tensor> scores;
    std::vector<double> targets;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      scores.push_back(traces[i].score);
      targets.push_back(static_cast<double>(labels[i]));
    }
    out.total = total_loss(scores, targets, consistency, config.alpha, config.beta);
  } else {
    std::vector<Tensor> nll;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      nll.push_back(scale(log(slice_cols(reshape(traces[i].probs, {1, traces[i].probs.numel()}), labels[i], 1)), -1.0));
    }
    out.total = scale(sum(concat_rows(nll)), config.alpha * inv_n);
    if (consistency.defined()) out.total = add(out.total, scale(consistency, config.beta));
  }
  out.consistency_term = consistency.defined() ? config.beta * consistency.item() : 0.0;
  out.prediction_term = out.total.item() - out.consistency_term;
  return out;
}

std::size_t predicted_class(const ForwardTrace& trace) {
  const auto p = trace.probs.data();
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

}  // namespace magcn
