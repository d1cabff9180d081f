#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qapg/graph.hpp"

namespace qapg::diff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// |a - n| / max(|a|, |n|, floor). With a 1e-5 step the central difference
// carries ~1e-10 of absolute noise on O(1) losses, so entries whose true
// gradient is below the floor are judged against the floor instead.
double relative_error(double analytic, double numeric, double floor = 1e-5);

using LossBuilder = std::function<Var(Graph<double>&, std::span<const Var> inputs)>;

// Compares reverse-mode gradients of build(...) with central differences.
// Inputs are drawn uniform(-1, 1) from `seed`; gradients are checked with
// respect to every input and, when given, every entry of `params` (or a
// seeded sample of at most `max_entries_per_tensor` entries per tensor).
GradCheckReport grad_check(const LossBuilder& build, const std::vector<Shape>& input_shapes,
                           std::uint64_t seed, ParamSet<double>* params = nullptr,
                           double step = 1e-5, std::size_t max_entries_per_tensor = 0);

}  // namespace qapg::diff
