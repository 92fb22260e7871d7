#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn {

/// Square query/key projections of the cross-modal affinity graph.
struct AffinityParams {
  Tensor query;  // d x d
  Tensor key;    // d x d

  static AffinityParams create(ParamStore& store, const std::string& prefix, std::size_t width, Rng& rng);
};

/// Per-head query/key projections, each d x d/M.
struct HeadProjections {
  std::vector<Tensor> query;
  std::vector<Tensor> key;

  std::size_t heads() const { return query.size(); }
  std::size_t head_width() const { return query.empty() ? 0 : query.front().cols(); }

  static HeadProjections create(ParamStore& store, const std::string& prefix, std::size_t width,
                                std::size_t heads, Rng& rng);
};

/// Standard multi-head attention: per-head Q/K/V plus an output projection.
struct MhaParams {
  HeadProjections qk;
  std::vector<Tensor> value;  // d x d/M each
  Tensor output;              // d x d

  std::size_t heads() const { return qk.heads(); }

  static MhaParams create(ParamStore& store, const std::string& prefix, std::size_t width, std::size_t heads,
                          Rng& rng);
};

/// softmax_rows(H_q W_Q (H_k W_K)^T / sqrt(d)); rows are the edge weights of
/// a fully connected graph over the n aligned positions.
Tensor affinity(const Tensor& h_query, const Tensor& h_key, const AffinityParams& p);

/// One row-stochastic n x n graph per head, scaled by sqrt(d/M).
std::vector<Tensor> multi_head_graphs(const Tensor& h, const HeadProjections& p);

/// Scaled dot-product self-attention over all heads, concatenated and
/// projected by the output matrix. Shape preserving.
Tensor mha_self(const Tensor& x, const MhaParams& p);

}  // namespace magcn
