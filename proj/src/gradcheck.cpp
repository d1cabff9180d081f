#include "qapg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qapg/errors.hpp"

namespace qapg::diff {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (cap != 0 && n > cap) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, const std::vector<Shape>& input_shapes,
                           std::uint64_t seed, ParamSet<double>* params, double step,
                           std::size_t max_entries_per_tensor) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Tensor<double>> inputs;
  for (auto s : input_shapes) {
    Tensor<double> t(s);
    for (auto& v : t.values()) v = dist(rng);
    inputs.push_back(std::move(t));
  }

  auto evaluate = [&](bool with_grad, std::vector<Tensor<double>>* input_grads) {
    Graph<double> g(with_grad);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.variable(t));
    const Var loss = build(g, vars);
    if (g.value(loss).size() != 1) throw ContractViolation("grad_check: loss must be scalar");
    const double value = g.scalar(loss);
    if (with_grad) {
      g.backward(loss);
      for (std::size_t k = 0; k < vars.size(); ++k) {
        const auto& gr = g.grad(vars[k]);
        (*input_grads)[k] = gr.empty() ? Tensor<double>(inputs[k].shape()) : gr;
      }
    }
    return value;
  };

  if (params) params->zero_grad();
  std::vector<Tensor<double>> input_grads(inputs.size());
  evaluate(true, &input_grads);

  GradCheckReport report;
  auto probe = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + step;
    const double plus = evaluate(false, nullptr);
    slot = saved - step;
    const double minus = evaluate(false, nullptr);
    slot = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic, numeric));
    ++report.entries;
  };

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (auto i : pick_entries(inputs[k].size(), max_entries_per_tensor, rng)) {
      probe(inputs[k][i], input_grads[k][i]);
    }
  }
  if (params) {
    for (auto& [name, p] : *params) {
      const Tensor<double> analytic = p.grad;
      for (auto i : pick_entries(p.value.size(), max_entries_per_tensor, rng)) {
        probe(p.value[i], analytic[i]);
      }
    }
    params->zero_grad();
  }
  return report;
}

}  // namespace qapg::diff
