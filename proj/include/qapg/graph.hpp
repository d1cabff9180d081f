#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "qapg/tensor.hpp"

namespace qapg::diff {

// Handle to a node in a Graph.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

// Reverse-mode tape. Every op records its forward value and, when any input
// needs a gradient, a backward closure. One graph per example/batch; a graph
// is single-threaded.
template <typename T>
class Graph {
 public:
  // With record == false no backward closures are built (inference).
  explicit Graph(bool record = true) : record_(record) { nodes_.reserve(256); }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  // Leaf whose gradient is kept (grad checks on inputs).
  Var variable(Tensor<T> value);
  // Leaf aliasing a parameter; gradients accumulate into p.grad.
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  Shape shape(Var v) const { return value(v).shape(); }
  T scalar(Var v) const { return value(v)[0]; }
  // Gradient of a variable() leaf after backward(); empty when unreached.
  const Tensor<T>& grad(Var v) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  // Adds a column vector to every column of a matrix.
  Var add_col(Var m, Var col);
  Var tanh(Var a);
  Var sigmoid(Var a);
  // Stacks along rows; all parts share the column count.
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  // Stacks column vectors (or matrices) side by side; all share the row count.
  Var hstack(std::span<const Var> parts);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var column(Var a, std::size_t j);
  Var transpose(Var a);
  // Rows `ids` of table, returned as columns: (table cols) x ids.size().
  // Gradient is scattered into the touched rows only.
  Var gather(Parameter<T>& table, std::span<const std::int32_t> ids);
  // axis 0 normalizes each column, axis 1 each row.
  Var softmax(Var a, int axis = 0);
  // Column-wise log-softmax.
  Var log_softmax(Var a);
  // Sets the given rows to `fill` in every column; no gradient flows there.
  Var mask_rows(Var a, std::span<const std::size_t> rows, T fill);
  // Sum over columns t of -logp(targets[t], t), skipping targets equal to pad.
  Var nll_loss(Var logp, std::span<const std::int32_t> targets, std::int32_t pad);
  Var sum(Var a);
  // Mean of the columns: rows x 1.
  Var mean_cols(Var a);
  // Inverted dropout: identity when !train or p == 0.
  Var dropout(Var a, T p, bool train, Rng& rng);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Var push(Tensor<T> value, bool requires_grad);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  bool tracking(std::initializer_list<Var> inputs) const;
  Tensor<T>& grad_ref(Var v);
  const Tensor<T>& out_grad(Var v) const { return nodes_[v.id].grad; }
  void check(Var v) const;

  bool record_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace qapg::diff
