#include "magcn/encoders.hpp"

#include <vector>

#include "magcn/errors.hpp"

namespace magcn {

LstmParams LstmParams::create(ParamStore& store, const std::string& prefix, std::size_t input_width,
                              std::size_t hidden_width, Rng& rng) {
  if (hidden_width == 0) throw ConfigError("LSTM hidden width must be positive");
  LstmParams p;
  Tensor* w[] = {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell};
  Tensor* u[] = {&p.u_input, &p.u_forget, &p.u_output, &p.u_cell};
  Tensor* b[] = {&p.b_input, &p.b_forget, &p.b_output, &p.b_cell};
  const char* gate[] = {"i", "f", "o", "c"};
  for (int g = 0; g < 4; ++g) {
    *w[g] = store.add_xavier(prefix + ".W_" + gate[g], input_width, hidden_width, rng);
    *u[g] = store.add_xavier(prefix + ".U_" + gate[g], hidden_width, hidden_width, rng);
    *b[g] = store.add_constant(prefix + ".b_" + gate[g], {hidden_width}, g == 1 ? 1.0 : 0.0);
  }
  return p;
}

LstmState lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev, const LstmParams& p) {
  if (x_t.cols() != p.input_width() || h_prev.cols() != p.hidden_width() || c_prev.cols() != p.hidden_width()) {
    throw DimensionError("lstm_cell: input " + shape_str(x_t.shape()) + ", state " + shape_str(h_prev.shape()) +
                         " against params " + shape_str(p.w_input.shape()));
  }
  auto pre = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
    return add_bias(add(matmul(x_t, w), matmul(h_prev, u)), b);
  };
  const Tensor i = sigmoid(pre(p.w_input, p.u_input, p.b_input));
  const Tensor f = sigmoid(pre(p.w_forget, p.u_forget, p.b_forget));
  const Tensor o = sigmoid(pre(p.w_output, p.u_output, p.b_output));
  const Tensor g = tanh(pre(p.w_cell, p.u_cell, p.b_cell));
  const Tensor c = add(mul(f, c_prev), mul(i, g));
  return {mul(o, tanh(c)), c};
}

namespace {

std::vector<Tensor> run_direction(const Tensor& x, const LstmParams& p, bool reverse) {
  const std::size_t n = x.rows();
  std::vector<Tensor> out(n);
  LstmState state{Tensor::zeros({1, p.hidden_width()}), Tensor::zeros({1, p.hidden_width()})};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    state = lstm_cell(slice_rows(x, t, 1), state.h, state.c, p);
    out[t] = state.h;
  }
  return out;
}

}  // namespace

Tensor bilstm(const Tensor& x, const LstmParams& forward, const LstmParams& backward) {
  if (x.rank() != 2 || x.rows() == 0) throw ContractError("bilstm: empty sequence");
  if (x.cols() != forward.input_width() || x.cols() != backward.input_width()) {
    throw DimensionError("bilstm: input " + shape_str(x.shape()) + " against input width " +
                         std::to_string(forward.input_width()));
  }
  const auto fwd = run_direction(x, forward, false);
  const auto bwd = run_direction(x, backward, true);
  std::vector<Tensor> rows;
  rows.reserve(fwd.size());
  for (std::size_t t = 0; t < fwd.size(); ++t) rows.push_back(concat_cols({fwd[t], bwd[t]}));
  return concat_rows(rows);
}

}  // namespace magcn
