#include "qapg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qapg/errors.hpp"

namespace qapg::train {

Snapshot snapshot(const diff::ParamSet<float>& params) {
  Snapshot out;
  for (const auto& [name, p] : params) out.emplace(name, p.value);
  return out;
}

void restore(diff::ParamSet<float>& params, const Snapshot& values) {
  for (auto& [name, p] : params) {
    const auto it = values.find(name);
    if (it == values.end() || it->second.shape() != p.value.shape()) {
      throw ContractViolation("snapshot does not match parameter " + name);
    }
    p.value = it->second;
  }
}

namespace {

void scale_grads(diff::ParamSet<float>& params, float factor) {
  for (auto& [name, p] : params) {
    if (p.sparse) {
      const auto cols = p.grad.cols();
      std::vector<std::size_t> rows = p.touched_rows;
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      for (auto r : rows) {
        for (std::size_t c = 0; c < cols; ++c) p.grad(r, c) *= factor;
      }
    } else {
      for (auto& g : p.grad.values()) g *= factor;
    }
  }
}

}  // namespace

FitResult fit(diff::ParamSet<float>& params, std::size_t num_examples, const ExampleLoss& loss,
              const FitOptions& options, const Validation& validate, const EpochCallback& on_epoch) {
  if (num_examples == 0) throw DataError("cannot train on an empty corpus");
  if (options.batch_size == 0) throw ContractViolation("batch_size must be >= 1");
  diff::Rng rng(options.seed);
  diff::Adam<float> adam(params, options.adam);
  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), 0);

  FitResult result;
  Snapshot best;
  double best_score = 0.0;
  params.zero_grad();
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    // Fisher-Yates with raw engine output keeps the order portable.
    for (std::size_t i = num_examples - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    const double lr = options.lr.at(epoch);
    double epoch_loss = 0.0;
    double epoch_tokens = 0.0;
    double norm_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < num_examples; begin += options.batch_size) {
      const auto end = std::min(num_examples, begin + options.batch_size);
      double batch_loss = 0.0;
      double batch_tokens = 0.0;
      for (auto k = begin; k < end; ++k) {
        diff::Graph<float> g;
        const auto [l, tokens] = loss(g, order[k], rng);
        const double value = g.scalar(l);
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", example " +
                             std::to_string(order[k]));
        }
        g.backward(l);
        batch_loss += value;
        batch_tokens += tokens;
      }
      if (batch_tokens <= 0.0) continue;
      scale_grads(params, static_cast<float>(1.0 / batch_tokens));
      const double norm = params.clip_grad_norm(options.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient norm at epoch " + std::to_string(epoch));
      }
      adam.step(lr);
      params.zero_grad();
      epoch_loss += batch_loss;
      epoch_tokens += batch_tokens;
      norm_sum += norm;
      ++batches;
    }
    if (!params.all_finite()) throw NumericError("parameters diverged at epoch " + std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = epoch_tokens > 0 ? epoch_loss / epoch_tokens : 0.0;
    entry.train_ppl = std::exp(entry.train_loss);
    entry.grad_norm = batches > 0 ? norm_sum / static_cast<double>(batches) : 0.0;
    entry.tokens = static_cast<std::size_t>(epoch_tokens);
    if (validate) {
      entry.valid_score = validate();
      if (result.best_epoch == 0 || *entry.valid_score < best_score) {
        best_score = *entry.valid_score;
        result.best_epoch = epoch;
        best = snapshot(params);
      }
    } else {
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (options.stop_at_train_ppl > 0.0 && entry.train_ppl < options.stop_at_train_ppl) {
      result.stopped_early = true;
      break;
    }
  }
  if (validate && result.best_epoch != 0) restore(params, best);
  return result;
}

}  // namespace qapg::train
