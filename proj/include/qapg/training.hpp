#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qapg/graph.hpp"
#include "qapg/optim.hpp"

namespace qapg::train {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean NLL per target token
  double train_ppl = 0.0;   // exp(train_loss)
  std::optional<double> valid_score;  // lower is better
  double grad_norm = 0.0;   // mean pre-clip norm over batches
  std::size_t tokens = 0;
};

struct FitOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  diff::LrSchedule lr;
  diff::AdamConfig adam;
  double clip_norm = 5.0;
  std::uint64_t seed = 13;
  // Stop once an epoch's training perplexity falls below this (0 disables).
  double stop_at_train_ppl = 0.0;
};

// Builds the loss of example `index` and returns it with its token count.
using ExampleLoss = std::function<std::pair<diff::Var, double>(diff::Graph<float>&, std::size_t index, diff::Rng& rng)>;
using Validation = std::function<double()>;
using EpochCallback = std::function<void(const EpochLog&)>;

using Snapshot = std::map<std::string, diff::Tensor<float>>;

Snapshot snapshot(const diff::ParamSet<float>& params);
void restore(diff::ParamSet<float>& params, const Snapshot& values);

struct FitResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Shuffled minibatch Adam with global-norm clipping. Gradients are averaged
// per target token. When `validate` is given the parameters of the epoch
// with the lowest validation score are restored at the end; otherwise the
// final parameters are kept. Throws NumericError on a non-finite loss or
// gradient.
FitResult fit(diff::ParamSet<float>& params, std::size_t num_examples, const ExampleLoss& loss,
              const FitOptions& options, const Validation& validate = {}, const EpochCallback& on_epoch = {});

}  // namespace qapg::train
