#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magcn/attention.hpp"
#include "magcn/dcgcn.hpp"
#include "magcn/embeddings.hpp"
#include "magcn/encoders.hpp"
#include "magcn/modality.hpp"
#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn {

enum class LossKind { kAbsoluteError, kCrossEntropy };

struct MagcnConfig {
  std::size_t d = 64;               // shared model width, 2 x LSTM hidden
  std::size_t sublayers = 2;        // L
  std::size_t heads = 4;            // M
  std::size_t blocks = 2;           // Z
  std::size_t sentiment_width = 8;  // d_s
  double alpha = 1.0;
  double beta = 0.1;
  std::size_t num_classes = 2;

  bool use_sentiment_embedding = true;
  bool use_consistency_loss = true;
  bool use_dense_gcn = true;
  bool polarity_aware_sentiment = false;
  ModalitySet modalities = ModalitySet::all();
  LossKind loss = LossKind::kAbsoluteError;

  std::size_t language_width = 16;  // d_e
  std::size_t vision_width = 8;
  std::size_t acoustic_width = 8;
  /// Non-empty selects the token-id path with a trainable V x d_e table;
  /// index 0 doubles as the unknown-word row.
  std::vector<std::string> vocabulary;

  /// Throws ConfigError on any violated constraint.
  void validate() const;

  std::size_t effective_sentiment_width() const {
    return use_sentiment_embedding && modalities.has(Modality::kLanguage) ? sentiment_width : 0;
  }
  /// Modality that plays the language role: L when enabled, else V, else A.
  Modality anchor() const;
  /// Modalities fused with the anchor by an inter-modality tower.
  std::vector<Modality> tower_modalities() const;
  std::size_t tower_width() const;

  bool operator==(const MagcnConfig&) const = default;
};

/// Graph convolution stage of a tower or a language-tower head: a DCGCN
/// block, or a vanilla GCN stack for the dense-connection ablation.
struct GraphBlock {
  bool dense = true;
  DcgcnParams dense_params;
  GcnParams vanilla_params;
  Tensor out_weight;  // vanilla only; the dense block carries its own
  Tensor out_bias;

  /// Output before any linear.
  Tensor body(const Tensor& graph, const Tensor& x) const;
  /// Body followed by the block linear.
  Tensor forward(const Tensor& graph, const Tensor& x) const;
  std::size_t parameter_count() const;
};

/// Affinity -> graph convolution -> sentiment concat -> MHA.
struct TowerParams {
  Modality other{};
  AffinityParams affinity;
  GraphBlock graph;
  MhaParams mha;
};

/// One of the Z blocks of the language tower.
struct LanguageBlock {
  HeadProjections graphs;
  std::vector<GraphBlock> convs;
  Tensor w_out;  // (d*M) x d
  Tensor b_out;  // d
};

class MagcnModel {
 public:
  MagcnModel(MagcnConfig config, std::uint64_t seed);

  const MagcnConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  const std::optional<SentimentEmbedding>& sentiment() const { return sentiment_; }
  const Tensor& token_table() const { return token_table_; }
  const LstmParams& encoder(Modality m, bool backward) const;
  const TowerParams* tower(Modality other) const;
  const std::vector<LanguageBlock>& language_blocks() const { return language_blocks_; }
  const Tensor& consistency_projection() const { return consistency_projection_; }
  const Tensor& head_weight() const { return head_weight_; }
  const Tensor& head_bias() const { return head_bias_; }

  std::size_t token_id(const std::string& token) const;

 private:
  MagcnConfig config_;
  ParamStore params_;
  std::optional<SentimentEmbedding> sentiment_;
  Tensor token_table_;
  std::vector<std::pair<Modality, std::pair<LstmParams, LstmParams>>> encoders_;
  std::vector<TowerParams> towers_;
  std::vector<LanguageBlock> language_blocks_;
  Tensor consistency_projection_;
  Tensor head_weight_;
  Tensor head_bias_;
  std::vector<std::pair<std::string, std::size_t>> vocab_index_;
};

/// Features of one aligned utterance as consumed by the model.
struct ModelInput {
  Tensor language;                     // n x d_e, or undefined with token ids
  std::vector<std::size_t> token_ids;  // token-id path
  std::vector<std::size_t> flags;      // sentiment flags per token
  Tensor vision;                       // n x d_v
  Tensor acoustic;                     // n x d_a

  std::size_t length() const;
};

/// Post-encoder representations; the entry point for tests that bypass the Bi-LSTMs.
struct Encodings {
  Tensor h_l, h_v, h_a;  // n x d, undefined when the modality is off
  Tensor sentiment;      // n x d_s (zero width without sentiment embedding)
};

/// Every named intermediate of one forward pass. When language is disabled
/// the anchor modality occupies the language slots (h_l_out etc.) and a
/// V-A tower is reported in the acoustic slots.
struct ForwardTrace {
  Tensor x_l, sentiment;
  Tensor h_l, h_v, h_a;
  Tensor a_lv, a_la;
  Tensor h_lv, h_la;          // graph block outputs before the block linear
  Tensor h_lv_gcn, h_la_gcn;  // after the block linear
  Tensor hs_lv, hs_la;
  Tensor hs_lv_out, hs_la_out;
  Tensor h_l_out;
  Tensor pooled;       // 1 x F
  Tensor logits;       // 1 x C
  Tensor probs;        // C
  Tensor score;        // expected class index under probs
  Tensor consistency;  // undefined when the consistency term does not apply
};

/// Affinity -> graph block (with linear) -> concat S -> MHA. Fills the
/// given trace slots when non-null.
Tensor inter_modality_forward(const Tensor& h_l, const Tensor& h_other, const Tensor& sentiment,
                              const TowerParams& tower, Tensor* graph_out = nullptr, Tensor* fused_body = nullptr,
                              Tensor* fused = nullptr, Tensor* with_sentiment = nullptr);

/// Z blocks of multi-head graphs feeding M independent graph blocks.
Tensor unimodal_language_forward(const Tensor& h_l, std::span<const LanguageBlock> blocks);

/// |C_L C_LV^T - C_L C_LA^T|_F^2 over row-normalised inputs. A defined
/// projection maps the bimodal inputs to the width of h_l_out first.
Tensor consistency_loss(const Tensor& h_l_out, const Tensor& hs_lv_out, const Tensor& hs_la_out,
                        const Tensor& projection = Tensor());

/// Concat -> mean over rows -> linear head -> softmax.
Tensor predict(std::span<const Tensor> representations, const Tensor& head_weight, const Tensor& head_bias,
               Tensor* pooled = nullptr, Tensor* logits = nullptr);

/// sum_c c * p_c as a scalar tensor.
Tensor expected_class(const Tensor& probs);

/// alpha * mean_i |score_i - target_i| + beta * consistency. An undefined
/// consistency contributes nothing.
Tensor total_loss(std::span<const Tensor> scores, std::span<const double> targets, const Tensor& consistency,
                  double alpha, double beta);

ForwardTrace forward_from_encodings(const Encodings& enc, const MagcnModel& model);
ForwardTrace magcn_forward(const ModelInput& input, const MagcnModel& model);

struct BatchLoss {
  Tensor total;
  double prediction_term = 0.0;
  double consistency_term = 0.0;  // beta * mean L_c as added to the loss
};

/// Objective over a batch of forward passes with the configured loss kind.
BatchLoss batch_loss(std::span<const ForwardTrace> traces, std::span<const std::size_t> labels,
                     const MagcnConfig& config);

/// Argmax with ties broken toward the lower class id.
std::size_t predicted_class(const ForwardTrace& trace);

}  // namespace magcn
