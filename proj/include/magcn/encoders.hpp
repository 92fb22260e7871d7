#pragma once

#include <cstddef>
#include <string>

#include "magcn/params.hpp"
#include "magcn/tensor.hpp"

namespace magcn {

/// Gate parameters of one LSTM direction. Input weights are d_in x d_h,
/// recurrent weights d_h x d_h, biases d_h.
struct LstmParams {
  Tensor w_input, w_forget, w_output, w_cell;
  Tensor u_input, u_forget, u_output, u_cell;
  Tensor b_input, b_forget, b_output, b_cell;

  std::size_t input_width() const { return w_input.rows(); }
  std::size_t hidden_width() const { return u_input.rows(); }

  /// Xavier-uniform weights, zero biases except the forget bias (1.0).
  static LstmParams create(ParamStore& store, const std::string& prefix, std::size_t input_width,
                           std::size_t hidden_width, Rng& rng);
};

struct LstmState {
  Tensor h;  // 1 x d_h
  Tensor c;  // 1 x d_h
};

LstmState lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev, const LstmParams& p);

/// Row t of the result is [forward h_t ; backward h_t], both directions
/// starting from zero state.
Tensor bilstm(const Tensor& x, const LstmParams& forward, const LstmParams& backward);

}  // namespace magcn
