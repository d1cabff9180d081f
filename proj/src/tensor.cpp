#include "qapg/tensor.hpp"

#include <cmath>

#include "qapg/errors.hpp"

namespace qapg::diff {

std::string to_string(Shape s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

template <typename T>
void Parameter<T>::zero_grad() {
  if (grad.empty()) return;
  if (sparse) {
    const auto cols = grad.cols();
    for (auto r : touched_rows) std::fill_n(grad.data() + r * cols, cols, T(0));
  } else {
    grad.fill(T(0));
  }
  touched_rows.clear();
}

template <typename T>
Parameter<T>& ParamSet<T>::add(const std::string& name, std::size_t rows, std::size_t cols,
                               bool sparse) {
  if (rows == 0 || cols == 0) throw ContractViolation("parameter " + name + " has an empty shape");
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw ContractViolation("duplicate parameter name: " + name);
  auto& p = it->second;
  p.name = name;
  p.value = Tensor<T>(rows, cols);
  p.grad = Tensor<T>(rows, cols);
  p.sparse = sparse;
  return p;
}

template <typename T>
Parameter<T>& ParamSet<T>::at(const std::string& name) {
  const auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("unknown parameter: " + name);
  return it->second;
}

template <typename T>
const Parameter<T>& ParamSet<T>::at(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw ContractViolation("unknown parameter: " + name);
  return it->second;
}

template <typename T>
std::size_t ParamSet<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParamSet<T>::init_uniform(Rng& rng, double low, double high) {
  std::uniform_real_distribution<double> dist(low, high);
  for (auto& [name, p] : params_) {
    for (auto& v : p.value.values()) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

template <typename T>
double ParamSet<T>::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, p] : params_) {
    for (auto g : p.grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double ParamSet<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const auto factor = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : params_) {
      for (auto& g : p.grad.values()) g *= factor;
    }
  }
  return norm;
}

template <typename T>
bool ParamSet<T>::all_finite() const {
  for (const auto& [name, p] : params_) {
    for (auto v : p.value.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template struct Parameter<float>;
template struct Parameter<double>;
template class ParamSet<float>;
template class ParamSet<double>;

}  // namespace qapg::diff
