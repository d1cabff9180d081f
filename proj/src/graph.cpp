#include "qapg/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "qapg/errors.hpp"

namespace qapg::diff {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
MatMap<T> as_mat(Tensor<T>& t) {
  return MatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
ConstMatMap<T> as_mat(const Tensor<T>& t) {
  return ConstMatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

void require_shape(bool ok, const char* op, Shape a, Shape b) {
  if (!ok) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + to_string(a) + " vs " +
                            to_string(b));
  }
}

}  // namespace

template <typename T>
Var Graph<T>::push(Tensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
bool Graph<T>::tracking(std::initializer_list<Var> inputs) const {
  if (!record_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return needs(v); });
}

template <typename T>
void Graph<T>::check(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ContractViolation("invalid graph variable");
}

template <typename T>
Tensor<T>& Graph<T>::grad_ref(Var v) {
  auto& node = nodes_[v.id];
  if (node.param != nullptr) return node.param->grad;
  if (node.grad.empty()) node.grad = Tensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value), false);
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  return push(std::move(value), record_);
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  Node node;
  node.param = &p;
  node.requires_grad = record_;
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  check(v);
  const auto& node = nodes_[v.id];
  return node.param != nullptr ? node.param->value : node.value;
}

template <typename T>
const Tensor<T>& Graph<T>::grad(Var v) const {
  check(v);
  const auto& node = nodes_[v.id];
  return node.param != nullptr ? node.param->grad : node.grad;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  check(loss);
  if (value(loss).size() != 1) throw ContractViolation("backward requires a scalar loss");
  if (!nodes_[loss.id].requires_grad) return;
  grad_ref(loss)[0] += T(1);
  for (auto i = static_cast<std::int64_t>(loss.id); i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward && !node.grad.empty()) node.backward();
  }
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_shape(x.cols() == y.rows(), "matmul", x.shape(), y.shape());
  Tensor<T> out(x.rows(), y.cols());
  as_mat(out).noalias() = as_mat(x) * as_mat(y);
  const Var o = push(std::move(out), tracking({a, b}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, b, o] {
      const auto& g = out_grad(o);
      if (needs(a)) as_mat(grad_ref(a)).noalias() += as_mat(g) * as_mat(value(b)).transpose();
      if (needs(b)) as_mat(grad_ref(b)).noalias() += as_mat(value(a)).transpose() * as_mat(g);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_shape(x.shape() == y.shape(), "add", x.shape(), y.shape());
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  const Var o = push(std::move(out), tracking({a, b}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, b, o] {
      const auto& g = out_grad(o);
      for (Var v : {a, b}) {
        if (!needs(v)) continue;
        auto& gv = grad_ref(v);
        for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_shape(x.shape() == y.shape(), "sub", x.shape(), y.shape());
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  const Var o = push(std::move(out), tracking({a, b}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, b, o] {
      const auto& g = out_grad(o);
      if (needs(a)) {
        auto& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (needs(b)) {
        auto& gb = grad_ref(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  require_shape(x.shape() == y.shape(), "mul", x.shape(), y.shape());
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const Var o = push(std::move(out), tracking({a, b}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, b, o] {
      const auto& g = out_grad(o);
      if (needs(a)) {
        auto& ga = grad_ref(a);
        const auto& y = value(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (needs(b)) {
        auto& gb = grad_ref(b);
        const auto& x = value(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::scale(Var a, T factor) {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v *= factor;
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, factor] {
      const auto& g = out_grad(o);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::add_col(Var m, Var col) {
  const auto& x = value(m);
  const auto& c = value(col);
  require_shape(c.cols() == 1 && c.rows() == x.rows(), "add_col", x.shape(), c.shape());
  Tensor<T> out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) += c[r];
  }
  const Var o = push(std::move(out), tracking({m, col}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, m, col, o] {
      const auto& g = out_grad(o);
      if (needs(m)) {
        auto& gm = grad_ref(m);
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (needs(col)) {
        auto& gc = grad_ref(col);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t j = 0; j < g.cols(); ++j) gc[r] += g(r, j);
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::tanh(Var a) {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v = std::tanh(v);
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o] {
      const auto& g = out_grad(o);
      const auto& y = value(o);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sigmoid(Var a) {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v = stable_sigmoid(v);
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o] {
      const auto& g = out_grad(o);
      const auto& y = value(o);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat: no inputs");
  const auto cols = value(parts[0]).cols();
  std::size_t rows = 0;
  bool track = false;
  for (Var p : parts) {
    const auto& v = value(p);
    require_shape(v.cols() == cols, "concat", value(parts[0]).shape(), v.shape());
    rows += v.rows();
    track = track || (record_ && needs(p));
  }
  Tensor<T> out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& v = value(p);
    std::copy(v.data(), v.data() + v.size(), out.data() + offset);
    offset += v.size();
  }
  const Var o = push(std::move(out), track);
  if (track) {
    std::vector<Var> inputs(parts.begin(), parts.end());
    nodes_[o.id].backward = [this, inputs = std::move(inputs), o] {
      const auto& g = out_grad(o);
      std::size_t offset = 0;
      for (Var p : inputs) {
        const auto n = value(p).size();
        if (needs(p)) {
          auto& gp = grad_ref(p);
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
        }
        offset += n;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::hstack(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("hstack: no inputs");
  const auto rows = value(parts[0]).rows();
  std::size_t cols = 0;
  bool track = false;
  for (Var p : parts) {
    const auto& v = value(p);
    require_shape(v.rows() == rows, "hstack", value(parts[0]).shape(), v.shape());
    cols += v.cols();
    track = track || (record_ && needs(p));
  }
  Tensor<T> out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& v = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < v.cols(); ++j) out(r, offset + j) = v(r, j);
    }
    offset += v.cols();
  }
  const Var o = push(std::move(out), track);
  if (track) {
    std::vector<Var> inputs(parts.begin(), parts.end());
    nodes_[o.id].backward = [this, inputs = std::move(inputs), o] {
      const auto& g = out_grad(o);
      std::size_t offset = 0;
      for (Var p : inputs) {
        const auto c = value(p).cols();
        if (needs(p)) {
          auto& gp = grad_ref(p);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t j = 0; j < c; ++j) gp(r, j) += g(r, offset + j);
          }
        }
        offset += c;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const auto& x = value(a);
  if (count == 0 || begin + count > x.rows()) {
    throw ContractViolation("slice_rows: rows [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") out of range for " +
                            to_string(x.shape()));
  }
  Tensor<T> out(count, x.cols());
  std::copy(x.data() + begin * x.cols(), x.data() + (begin + count) * x.cols(), out.data());
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, begin] {
      const auto& g = out_grad(o);
      auto& ga = grad_ref(a);
      const auto offset = begin * g.cols();
      for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::column(Var a, std::size_t j) {
  const auto& x = value(a);
  if (j >= x.cols()) throw ContractViolation("column: index out of range for " + to_string(x.shape()));
  Tensor<T> out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = x(r, j);
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, j] {
      const auto& g = out_grad(o);
      auto& ga = grad_ref(a);
      for (std::size_t r = 0; r < g.rows(); ++r) ga(r, j) += g[r];
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::transpose(Var a) {
  const auto& x = value(a);
  Tensor<T> out(x.cols(), x.rows());
  as_mat(out) = as_mat(x).transpose();
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o] {
      as_mat(grad_ref(a)) += as_mat(out_grad(o)).transpose();
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::gather(Parameter<T>& table, std::span<const std::int32_t> ids) {
  const auto& e = table.value;
  if (ids.empty()) throw ContractViolation("gather: no ids");
  const auto dim = e.cols();
  Tensor<T> out(dim, ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const auto id = ids[j];
    if (id < 0 || static_cast<std::size_t>(id) >= e.rows()) {
      throw ContractViolation("gather: id " + std::to_string(id) + " outside table " + table.name);
    }
    for (std::size_t d = 0; d < dim; ++d) out(d, j) = e(static_cast<std::size_t>(id), d);
  }
  const Var o = push(std::move(out), record_);
  if (record_) {
    std::vector<std::int32_t> rows(ids.begin(), ids.end());
    nodes_[o.id].backward = [this, &table, rows = std::move(rows), o] {
      const auto& g = out_grad(o);
      const auto dim = g.rows();
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto r = static_cast<std::size_t>(rows[j]);
        for (std::size_t d = 0; d < dim; ++d) table.grad(r, d) += g(d, j);
        if (table.sparse) table.touched_rows.push_back(r);
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::softmax(Var a, int axis) {
  const auto& x = value(a);
  if (axis != 0 && axis != 1) throw ContractViolation("softmax: axis must be 0 or 1");
  const auto outer = axis == 0 ? x.cols() : x.rows();
  const auto inner = axis == 0 ? x.rows() : x.cols();
  if (inner == 0) throw ContractViolation("softmax: empty axis");
  auto at = [axis](std::size_t o, std::size_t i, std::size_t cols) {
    return axis == 0 ? i * cols + o : o * cols + i;
  };
  const auto cols = x.cols();
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    T mx = x[at(o, 0, cols)];
    for (std::size_t i = 1; i < inner; ++i) mx = std::max(mx, x[at(o, i, cols)]);
    T total = 0;
    for (std::size_t i = 0; i < inner; ++i) {
      const T e = std::exp(x[at(o, i, cols)] - mx);
      out[at(o, i, cols)] = e;
      total += e;
    }
    for (std::size_t i = 0; i < inner; ++i) out[at(o, i, cols)] /= total;
  }
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, outer, inner, cols, at] {
      const auto& g = out_grad(o);
      const auto& y = value(o);
      auto& ga = grad_ref(a);
      for (std::size_t k = 0; k < outer; ++k) {
        T dot = 0;
        for (std::size_t i = 0; i < inner; ++i) dot += g[at(k, i, cols)] * y[at(k, i, cols)];
        for (std::size_t i = 0; i < inner; ++i) {
          const auto idx = at(k, i, cols);
          ga[idx] += y[idx] * (g[idx] - dot);
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::log_softmax(Var a) {
  const auto& x = value(a);
  if (x.rows() == 0) throw ContractViolation("log_softmax: empty axis");
  Tensor<T> out(x.shape());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    T mx = x(0, j);
    for (std::size_t r = 1; r < x.rows(); ++r) mx = std::max(mx, x(r, j));
    T total = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) total += std::exp(x(r, j) - mx);
    const T lse = mx + std::log(total);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, j) = x(r, j) - lse;
  }
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o] {
      const auto& g = out_grad(o);
      const auto& y = value(o);
      auto& ga = grad_ref(a);
      for (std::size_t j = 0; j < g.cols(); ++j) {
        T total = 0;
        for (std::size_t r = 0; r < g.rows(); ++r) total += g(r, j);
        for (std::size_t r = 0; r < g.rows(); ++r) ga(r, j) += g(r, j) - std::exp(y(r, j)) * total;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::mask_rows(Var a, std::span<const std::size_t> rows, T fill) {
  Tensor<T> out = value(a);
  std::vector<char> masked(out.rows(), 0);
  for (auto r : rows) {
    if (r >= out.rows()) throw ContractViolation("mask_rows: row out of range");
    masked[r] = 1;
    for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) = fill;
  }
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, masked = std::move(masked)] {
      const auto& g = out_grad(o);
      auto& ga = grad_ref(a);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        if (masked[r]) continue;
        for (std::size_t j = 0; j < g.cols(); ++j) ga(r, j) += g(r, j);
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::nll_loss(Var logp, std::span<const std::int32_t> targets, std::int32_t pad) {
  const auto& lp = value(logp);
  if (targets.size() != lp.cols()) {
    throw ContractViolation("nll_loss: " + std::to_string(targets.size()) + " targets for " +
                            to_string(lp.shape()));
  }
  T total = 0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    if (targets[j] == pad) continue;
    if (targets[j] < 0 || static_cast<std::size_t>(targets[j]) >= lp.rows()) {
      throw ContractViolation("nll_loss: target out of range");
    }
    total -= lp(static_cast<std::size_t>(targets[j]), j);
  }
  Tensor<T> out(1, 1, total);
  const Var o = push(std::move(out), tracking({logp}));
  if (nodes_[o.id].requires_grad) {
    std::vector<std::int32_t> t(targets.begin(), targets.end());
    nodes_[o.id].backward = [this, logp, o, t = std::move(t), pad] {
      const T g = out_grad(o)[0];
      auto& gl = grad_ref(logp);
      for (std::size_t j = 0; j < t.size(); ++j) {
        if (t[j] != pad) gl(static_cast<std::size_t>(t[j]), j) -= g;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sum(Var a) {
  T total = 0;
  for (auto v : value(a).values()) total += v;
  const Var o = push(Tensor<T>(1, 1, total), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o] {
      const T g = out_grad(o)[0];
      for (auto& v : grad_ref(a).values()) v += g;
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::mean_cols(Var a) {
  const auto& x = value(a);
  if (x.cols() == 0) throw ContractViolation("mean_cols: no columns");
  Tensor<T> out(x.rows(), 1);
  const T inv = T(1) / static_cast<T>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T s = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x(r, j);
    out[r] = s * inv;
  }
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, inv] {
      const auto& g = out_grad(o);
      auto& ga = grad_ref(a);
      for (std::size_t r = 0; r < ga.rows(); ++r) {
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(r, j) += g[r] * inv;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::dropout(Var a, T p, bool train, Rng& rng) {
  if (p < T(0) || p >= T(1)) throw ContractViolation("dropout: probability must be in [0, 1)");
  if (!train || p == T(0)) return a;
  const auto& x = value(a);
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T kept_scale = T(1) / (T(1) - p);
  Tensor<T> mask(x.shape());
  for (auto& m : mask.values()) m = keep(rng) ? kept_scale : T(0);
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const Var o = push(std::move(out), tracking({a}));
  if (nodes_[o.id].requires_grad) {
    nodes_[o.id].backward = [this, a, o, mask = std::move(mask)] {
      const auto& g = out_grad(o);
      auto& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
    };
  }
  return o;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace qapg::diff
