#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qapg::diff {

using Rng = std::mt19937_64;

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape s);

// Dense row-major matrix; column vectors are n x 1.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
      : shape_{rows, cols}, values_(rows * cols, fill) {}
  explicit Tensor(Shape shape, T fill = T(0)) : Tensor(shape.rows, shape.cols, fill) {}

  static Tensor column(std::vector<T> values) {
    Tensor t;
    t.shape_ = {values.size(), 1};
    t.values_ = std::move(values);
    return t;
  }

  Shape shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  T operator[](std::size_t i) const { return values_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return values_[r * shape_.cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return values_[r * shape_.cols + c]; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  // Gather-only tables accumulate gradient into a few rows; zero_grad then
  // clears just those rows.
  bool sparse = false;
  std::vector<std::size_t> touched_rows;

  void zero_grad();
};

// Named parameter collection. Names are unique; iteration is in name order.
template <typename T>
class ParamSet {
 public:
  Parameter<T>& add(const std::string& name, std::size_t rows, std::size_t cols,
                    bool sparse = false);
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void init_uniform(Rng& rng, double low, double high);
  void zero_grad();
  double grad_norm() const;
  // Rescales gradients so their global L2 norm is at most max_norm. Returns
  // the norm before clipping.
  double clip_grad_norm(double max_norm);
  bool all_finite() const;

  // Copy of all values converted to another precision (same names/shapes).
  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, p] : params_) {
      auto& q = out.add(name, p.value.rows(), p.value.cols(), p.sparse);
      for (std::size_t i = 0; i < p.value.size(); ++i) q.value[i] = static_cast<U>(p.value[i]);
    }
    return out;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

}  // namespace qapg::diff
