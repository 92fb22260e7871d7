#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn {

/// Width bookkeeping of a densely connected block: L sublayers of width
/// d/L, sublayer l consuming d + d_sub * (l - 1) features.
struct DcgcnLayout {
  std::size_t width = 0;
  std::size_t sublayers = 0;
  std::size_t sub_width = 0;
  std::vector<std::size_t> input_widths;  // d^1 .. d^L

  /// Throws ConfigError unless width is a positive multiple of sublayers.
  static DcgcnLayout make(std::size_t width, std::size_t sublayers);
};

struct DcgcnParams {
  DcgcnLayout layout;
  std::vector<Tensor> weight;  // d^l x d_sub
  std::vector<Tensor> bias;    // d_sub
  // Block output linear d x d; undefined for the per-head blocks of the
  // language tower, which share one output projection instead.
  Tensor out_weight;
  Tensor out_bias;

  bool has_output_linear() const { return out_weight.defined(); }
  std::size_t parameter_count() const;

  static DcgcnParams create(ParamStore& store, const std::string& prefix, std::size_t width,
                            std::size_t sublayers, Rng& rng, bool output_linear = true);
};

/// Vanilla GCN stack, every layer d -> d.
struct GcnParams {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;

  std::size_t parameter_count() const;

  static GcnParams create(ParamStore& store, const std::string& prefix, std::size_t width, std::size_t layers,
                          Rng& rng);
};

/// concat(H^1..H^L) with H^l = ReLU(A [X; H^1..H^{l-1}] W^l + b^l). No output linear.
Tensor dcgcn_body(const Tensor& graph, const Tensor& x, const DcgcnParams& p);

/// dcgcn_body followed by the block's output linear.
Tensor dcgcn_forward(const Tensor& graph, const Tensor& x, const DcgcnParams& p);

/// One DCGCN per graph, outputs concatenated and mixed: [h^1..h^M] W_out + b_out.
Tensor multi_graph_dcgcn(std::span<const Tensor> graphs, const Tensor& x, std::span<const DcgcnParams> params,
                         const Tensor& w_out, const Tensor& b_out);

/// H^l = ReLU(A H^{l-1} W^l + b^l), H^0 = X.
Tensor vanilla_gcn_forward(const Tensor& graph, const Tensor& x, const GcnParams& p);

}  // namespace magcn
