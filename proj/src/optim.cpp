#include "qapg/optim.hpp"

#include <cmath>

#include "qapg/errors.hpp"

namespace qapg::diff {

template <typename T>
void adam_update(std::span<T> values, std::span<const T> grads, std::span<T> m, std::span<T> v,
                 std::size_t step, double lr, const AdamConfig& config) {
  if (step < 1) throw ContractViolation("adam step must be >= 1");
  if (grads.size() != values.size() || m.size() != values.size() || v.size() != values.size()) {
    throw ContractViolation("adam buffers must match parameter size");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grads[i];
    const double mi = config.beta1 * m[i] + (1.0 - config.beta1) * g;
    const double vi = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + config.eps);
    values[i] = static_cast<T>(values[i] - update);
  }
}

template <typename T>
Adam<T>::Adam(ParamSet<T>& params, AdamConfig config) : params_(params), config_(config) {
  for (auto& [name, p] : params_) {
    auto [it, inserted] =
        moments_.try_emplace(name, Moments{Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape())});
    if (!inserted) throw ContractViolation("parameter registered twice with optimizer: " + name);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  for (auto& [name, p] : params_) {
    auto& mom = moments_.at(name);
    adam_update<T>(p.value.values(), p.grad.values(), mom.m.values(), mom.v.values(), t_, lr,
                   config_);
  }
}

double LrSchedule::at(std::size_t epoch) const {
  if (epoch <= start_epoch) return base;
  const auto k = repeat ? epoch - start_epoch : 1;
  return base * std::pow(decay, static_cast<double>(k));
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, std::size_t, double, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, std::size_t, double, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace qapg::diff
