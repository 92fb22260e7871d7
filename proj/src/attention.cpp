#include "magcn/attention.hpp"

#include <cmath>

#include "magcn/errors.hpp"

namespace magcn {

namespace {

std::size_t checked_head_width(std::size_t width, std::size_t heads) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("width " + std::to_string(width) + " is not divisible by head count " +
                      std::to_string(heads));
  }
  return width / heads;
}

void check_heads(const Tensor& x, const HeadProjections& p, const char* op) {
  if (p.heads() == 0 || p.key.size() != p.heads()) throw ConfigError(std::string(op) + ": no heads");
  const std::size_t d = x.cols();
  if (p.head_width() * p.heads() != d) {
    throw ConfigError(std::string(op) + ": width " + std::to_string(d) + " is not " + std::to_string(p.heads()) +
                      " heads of " + std::to_string(p.head_width()));
  }
  for (std::size_t t = 0; t < p.heads(); ++t) {
    if (p.query[t].rows() != d || p.key[t].rows() != d) {
      throw DimensionError(std::string(op) + ": head projection " + shape_str(p.query[t].shape()) +
                           " does not accept input " + shape_str(x.shape()));
    }
  }
}

Tensor head_graph(const Tensor& x, const Tensor& wq, const Tensor& wk) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(wq.cols()));
  return softmax_rows(scale(matmul(matmul(x, wq), transpose(matmul(x, wk))), inv));
}

}  // namespace

AffinityParams AffinityParams::create(ParamStore& store, const std::string& prefix, std::size_t width, Rng& rng) {
  return {store.add_xavier(prefix + ".W_Q", width, width, rng), store.add_xavier(prefix + ".W_K", width, width, rng)};
}

HeadProjections HeadProjections::create(ParamStore& store, const std::string& prefix, std::size_t width,
                                        std::size_t heads, Rng& rng) {
  const std::size_t hw = checked_head_width(width, heads);
  HeadProjections p;
  for (std::size_t t = 0; t < heads; ++t) {
    p.query.push_back(store.add_xavier(prefix + ".W_Q." + std::to_string(t), width, hw, rng));
    p.key.push_back(store.add_xavier(prefix + ".W_K." + std::to_string(t), width, hw, rng));
  }
  return p;
}

MhaParams MhaParams::create(ParamStore& store, const std::string& prefix, std::size_t width, std::size_t heads,
                            Rng& rng) {
  MhaParams p;
  p.qk = HeadProjections::create(store, prefix, width, heads, rng);
  const std::size_t hw = width / heads;
  for (std::size_t t = 0; t < heads; ++t) {
    p.value.push_back(store.add_xavier(prefix + ".W_V." + std::to_string(t), width, hw, rng));
  }
  p.output = store.add_xavier(prefix + ".W_O", width, width, rng);
  return p;
}

Tensor affinity(const Tensor& h_query, const Tensor& h_key, const AffinityParams& p) {
  if (h_query.rows() != h_key.rows()) {
    throw AlignmentError("affinity: sequence lengths differ (" + std::to_string(h_query.rows()) + " vs " +
                         std::to_string(h_key.rows()) + ")");
  }
  const std::size_t d = h_query.cols();
  if (h_key.cols() != d || p.query.rows() != d || p.query.cols() != d || p.key.rows() != d || p.key.cols() != d) {
    throw DimensionError("affinity: widths " + shape_str(h_query.shape()) + ", " + shape_str(h_key.shape()) +
                         " against W_Q " + shape_str(p.query.shape()) + ", W_K " + shape_str(p.key.shape()));
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  return softmax_rows(scale(matmul(matmul(h_query, p.query), transpose(matmul(h_key, p.key))), inv));
}

std::vector<Tensor> multi_head_graphs(const Tensor& h, const HeadProjections& p) {
  check_heads(h, p, "multi_head_graphs");
  std::vector<Tensor> graphs;
  graphs.reserve(p.heads());
  for (std::size_t t = 0; t < p.heads(); ++t) graphs.push_back(head_graph(h, p.query[t], p.key[t]));
  return graphs;
}

Tensor mha_self(const Tensor& x, const MhaParams& p) {
  check_heads(x, p.qk, "mha_self");
  if (p.value.size() != p.heads()) throw ConfigError("mha_self: value projections do not match head count");
  const std::size_t d = x.cols();
  if (p.output.rows() != d || p.output.cols() != d) {
    throw DimensionError("mha_self: output projection " + shape_str(p.output.shape()) + " for width " +
                         std::to_string(d));
  }
  std::vector<Tensor> heads;
  heads.reserve(p.heads());
  for (std::size_t t = 0; t < p.heads(); ++t) {
    heads.push_back(matmul(head_graph(x, p.qk.query[t], p.qk.key[t]), matmul(x, p.value[t])));
  }
  return matmul(concat_cols(heads), p.output);
}

}  // namespace magcn
