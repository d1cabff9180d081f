#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "qapg/tensor.hpp"

namespace qapg::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update applied in place. `step` is 1-based.
template <typename T>
void adam_update(std::span<T> values, std::span<const T> grads, std::span<T> m, std::span<T> v,
                 std::size_t step, double lr, const AdamConfig& config = {});

// Adam over a ParamSet. Every parameter is registered once at construction
// with zero-initialized moment buffers.
template <typename T>
class Adam {
 public:
  explicit Adam(ParamSet<T>& params, AdamConfig config = {});

  void step(double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  struct Moments {
    Tensor<T> m;
    Tensor<T> v;
  };

  ParamSet<T>& params_;
  AdamConfig config_;
  std::map<std::string, Moments> moments_;
  std::size_t t_ = 0;
};

// Learning-rate schedule: lr0 * factor^k, where k counts the epochs after
// `start_epoch` (every epoch when `repeat`, otherwise at most once).
struct LrSchedule {
  double base = 0.002;
  double decay = 0.5;
  std::size_t start_epoch = 10;
  bool repeat = true;

  // `epoch` is 1-based.
  double at(std::size_t epoch) const;
};

}  // namespace qapg::diff
