#include "magcn/dcgcn.hpp"

#include "magcn/errors.hpp"

namespace magcn {

namespace {

void check_graph(const Tensor& graph, const Tensor& x, const char* op) {
  const std::size_t n = x.rows();
  if (graph.rank() != 2 || graph.rows() != n || graph.cols() != n) {
    throw DimensionError(std::string(op) + ": graph " + shape_str(graph.shape()) + " does not match " +
                         std::to_string(n) + " nodes");
  }
}

// ReLU((A G) W + b); the association is fixed so dense and vanilla layers
// agree bitwise on the same weights.
Tensor graph_conv(const Tensor& graph, const Tensor& features, const Tensor& weight, const Tensor& bias) {
  return relu(add_bias(matmul(matmul(graph, features), weight), bias));
}

}  // namespace

DcgcnLayout DcgcnLayout::make(std::size_t width, std::size_t sublayers) {
  if (sublayers == 0 || width == 0 || width % sublayers != 0) {
    throw ConfigError("DCGCN width " + std::to_string(width) + " is not divisible into " +
                      std::to_string(sublayers) + " sublayers");
  }
  DcgcnLayout layout{width, sublayers, width / sublayers, {}};
  for (std::size_t l = 1; l <= sublayers; ++l) layout.input_widths.push_back(width + layout.sub_width * (l - 1));
  return layout;
}

std::size_t DcgcnParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) n += weight[l].numel() + bias[l].numel();
  if (has_output_linear()) n += out_weight.numel() + out_bias.numel();
  return n;
}

DcgcnParams DcgcnParams::create(ParamStore& store, const std::string& prefix, std::size_t width,
                                std::size_t sublayers, Rng& rng, bool output_linear) {
  DcgcnParams p;
  p.layout = DcgcnLayout::make(width, sublayers);
  for (std::size_t l = 0; l < sublayers; ++l) {
    const std::string idx = std::to_string(l + 1);
    p.weight.push_back(store.add_xavier(prefix + ".W." + idx, p.layout.input_widths[l], p.layout.sub_width, rng));
    p.bias.push_back(store.add_constant(prefix + ".b." + idx, {p.layout.sub_width}, 0.0));
  }
  if (output_linear) {
    p.out_weight = store.add_xavier(prefix + ".W_lin", width, width, rng);
    p.out_bias = store.add_constant(prefix + ".b_lin", {width}, 0.0);
  }
  return p;
}

std::size_t GcnParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) n += weight[l].numel() + bias[l].numel();
  return n;
}

GcnParams GcnParams::create(ParamStore& store, const std::string& prefix, std::size_t width, std::size_t layers,
                            Rng& rng) {
  if (layers == 0) throw ConfigError("vanilla GCN needs at least one layer");
  GcnParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string idx = std::to_string(l + 1);
    p.weight.push_back(store.add_xavier(prefix + ".W." + idx, width, width, rng));
    p.bias.push_back(store.add_constant(prefix + ".b." + idx, {width}, 0.0));
  }
  return p;
}

Tensor dcgcn_body(const Tensor& graph, const Tensor& x, const DcgcnParams& p) {
  check_graph(graph, x, "dcgcn_forward");
  const DcgcnLayout& layout = p.layout;
  if (x.cols() != layout.width) {
    throw DimensionError("dcgcn_forward: input " + shape_str(x.shape()) + " for block width " +
                         std::to_string(layout.width));
  }
  if (p.weight.size() != layout.sublayers || p.bias.size() != layout.sublayers) {
    throw ConfigError("dcgcn_forward: parameter count does not match sublayers");
  }
  std::vector<Tensor> dense{x};
  std::vector<Tensor> outputs;
  for (std::size_t l = 0; l < layout.sublayers; ++l) {
    const Tensor g = dense.size() == 1 ? dense.front() : concat_cols(dense);
    if (p.weight[l].rows() != layout.input_widths[l] || p.weight[l].cols() != layout.sub_width) {
      throw DimensionError("dcgcn_forward: sublayer " + std::to_string(l + 1) + " weight " +
                           shape_str(p.weight[l].shape()));
    }
    Tensor h = graph_conv(graph, g, p.weight[l], p.bias[l]);
    dense.push_back(h);
    outputs.push_back(std::move(h));
  }
  return outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
}

Tensor dcgcn_forward(const Tensor& graph, const Tensor& x, const DcgcnParams& p) {
  if (!p.has_output_linear()) throw ConfigError("dcgcn_forward: block has no output linear");
  return add_bias(matmul(dcgcn_body(graph, x, p), p.out_weight), p.out_bias);
}

Tensor multi_graph_dcgcn(std::span<const Tensor> graphs, const Tensor& x, std::span<const DcgcnParams> params,
                         const Tensor& w_out, const Tensor& b_out) {
  if (graphs.empty() || graphs.size() != params.size()) {
    throw ConfigError("multi_graph_dcgcn: " + std::to_string(graphs.size()) + " graphs for " +
                      std::to_string(params.size()) + " DCGCN blocks");
  }
  const std::size_t d = x.cols();
  if (w_out.rows() != d * graphs.size() || w_out.cols() != d) {
    throw DimensionError("multi_graph_dcgcn: W_out " + shape_str(w_out.shape()) + " for " +
                         std::to_string(graphs.size()) + " blocks of width " + std::to_string(d));
  }
  std::vector<Tensor> heads;
  heads.reserve(graphs.size());
  for (std::size_t t = 0; t < graphs.size(); ++t) heads.push_back(dcgcn_body(graphs[t], x, params[t]));
  return add_bias(matmul(heads.size() == 1 ? heads.front() : concat_cols(heads), w_out), b_out);
}

Tensor vanilla_gcn_forward(const Tensor& graph, const Tensor& x, const GcnParams& p) {
  check_graph(graph, x, "vanilla_gcn_forward");
  if (p.weight.empty() || p.weight.size() != p.bias.size()) throw ConfigError("vanilla_gcn_forward: no layers");
  Tensor h = x;
  for (std::size_t l = 0; l < p.weight.size(); ++l) {
    if (p.weight[l].rows() != h.cols()) {
      throw DimensionError("vanilla_gcn_forward: layer " + std::to_string(l + 1) + " weight " +
                           shape_str(p.weight[l].shape()) + " for input " + shape_str(h.shape()));
    }
    h = graph_conv(graph, h, p.weight[l], p.bias[l]);
  }
  return h;
}

}  // namespace magcn
