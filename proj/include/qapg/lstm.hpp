#pragma once

#include <string>
#include <vector>

#include "qapg/graph.hpp"

namespace qapg::diff {

// Parameters of one LSTM cell. Gate blocks in z = Wx x + Wh h + b are ordered
// input, forget, candidate, output.
template <typename T>
struct LstmCell {
  Parameter<T>* wx = nullptr;  // 4H x I
  Parameter<T>* wh = nullptr;  // 4H x H
  Parameter<T>* b = nullptr;   // 4H x 1
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  static LstmCell create(ParamSet<T>& params, const std::string& prefix, std::size_t input_size,
                         std::size_t hidden_size);
};

struct LstmState {
  Var h;
  Var c;
};

template <typename T>
LstmState zero_state(Graph<T>& g, std::size_t hidden_size) {
  return {g.constant(Tensor<T>(hidden_size, 1)), g.constant(Tensor<T>(hidden_size, 1))};
}

// Standard LSTM step:
//   i = sig(z_i), f = sig(z_f), g = tanh(z_g), o = sig(z_o)
//   c' = f * c + i * g,  h' = o * tanh(c')
template <typename T>
LstmState lstm_step(Graph<T>& g, Var x, LstmState prev, const LstmCell<T>& cell);

// Same step with Wx x already computed (4H x 1).
template <typename T>
LstmState lstm_step_projected(Graph<T>& g, Var x_proj, LstmState prev, const LstmCell<T>& cell);

// Runs the cell over the columns of `inputs` (I x n). States are returned in
// input order; with `reverse` the sequence is consumed from the last column.
template <typename T>
std::vector<LstmState> run_lstm(Graph<T>& g, Var inputs, const LstmCell<T>& cell, bool reverse,
                                LstmState init);

}  // namespace qapg::diff
