#include "qapg/lstm.hpp"

#include "qapg/errors.hpp"

namespace qapg::diff {

template <typename T>
LstmCell<T> LstmCell<T>::create(ParamSet<T>& params, const std::string& prefix,
                                std::size_t input_size, std::size_t hidden_size) {
  LstmCell cell;
  cell.wx = &params.add(prefix + ".Wx", 4 * hidden_size, input_size);
  cell.wh = &params.add(prefix + ".Wh", 4 * hidden_size, hidden_size);
  cell.b = &params.add(prefix + ".b", 4 * hidden_size, 1);
  cell.input_size = input_size;
  cell.hidden_size = hidden_size;
  return cell;
}

template <typename T>
LstmState lstm_step_projected(Graph<T>& g, Var x_proj, LstmState prev, const LstmCell<T>& cell) {
  const auto hidden = cell.hidden_size;
  if (g.shape(x_proj) != Shape{4 * hidden, 1}) {
    throw ContractViolation("lstm_step: projected input " + to_string(g.shape(x_proj)) +
                            " does not match " + cell.wx->name);
  }
  if (g.shape(prev.h) != Shape{hidden, 1}) {
    throw ContractViolation("lstm_step: hidden state " + to_string(g.shape(prev.h)) +
                            " does not match " + cell.wh->name);
  }
  if (g.shape(prev.c) != Shape{hidden, 1}) {
    throw ContractViolation("lstm_step: cell state " + to_string(g.shape(prev.c)) +
                            " does not match " + cell.wh->name);
  }
  const Var z = g.add(g.add(x_proj, g.matmul(g.param(*cell.wh), prev.h)), g.param(*cell.b));
  const Var in = g.sigmoid(g.slice_rows(z, 0, hidden));
  const Var forget = g.sigmoid(g.slice_rows(z, hidden, hidden));
  const Var cand = g.tanh(g.slice_rows(z, 2 * hidden, hidden));
  const Var out = g.sigmoid(g.slice_rows(z, 3 * hidden, hidden));
  const Var c = g.add(g.mul(forget, prev.c), g.mul(in, cand));
  const Var h = g.mul(out, g.tanh(c));
  return {h, c};
}

template <typename T>
LstmState lstm_step(Graph<T>& g, Var x, LstmState prev, const LstmCell<T>& cell) {
  if (g.shape(x) != Shape{cell.input_size, 1}) {
    throw ContractViolation("lstm_step: input " + to_string(g.shape(x)) + " does not match " +
                            cell.wx->name + " " + to_string(cell.wx->value.shape()));
  }
  return lstm_step_projected(g, g.matmul(g.param(*cell.wx), x), prev, cell);
}

template <typename T>
std::vector<LstmState> run_lstm(Graph<T>& g, Var inputs, const LstmCell<T>& cell, bool reverse,
                                LstmState init) {
  const auto shape = g.shape(inputs);
  if (shape.rows != cell.input_size) {
    throw ContractViolation("run_lstm: inputs " + to_string(shape) + " do not match " +
                            cell.wx->name + " " + to_string(cell.wx->value.shape()));
  }
  const auto n = shape.cols;
  const Var proj = g.matmul(g.param(*cell.wx), inputs);
  std::vector<LstmState> states(n);
  LstmState state = init;
  for (std::size_t k = 0; k < n; ++k) {
    const auto t = reverse ? n - 1 - k : k;
    state = lstm_step_projected(g, g.column(proj, t), state, cell);
    states[t] = state;
  }
  return states;
}

template struct LstmCell<float>;
template struct LstmCell<double>;
template LstmState lstm_step(Graph<float>&, Var, LstmState, const LstmCell<float>&);
template LstmState lstm_step(Graph<double>&, Var, LstmState, const LstmCell<double>&);
template LstmState lstm_step_projected(Graph<float>&, Var, LstmState, const LstmCell<float>&);
template LstmState lstm_step_projected(Graph<double>&, Var, LstmState, const LstmCell<double>&);
template std::vector<LstmState> run_lstm(Graph<float>&, Var, const LstmCell<float>&, bool, LstmState);
template std::vector<LstmState> run_lstm(Graph<double>&, Var, const LstmCell<double>&, bool,
                                         LstmState);

}  // namespace qapg::diff
