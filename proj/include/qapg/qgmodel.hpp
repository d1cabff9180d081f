#pragma once

#include <cstdint>
#include <vector>

#include "qapg/features.hpp"
#include "qapg/lstm.hpp"

namespace qapg::model {

struct QgDims {
  FeatureSpec input;
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;
  double dropout = 0.0;
};

// Bi-LSTM encoder, dot-attention LSTM decoder. The decoder output is
// softmax(Ws tanh(Wr [h; c] + b)) with the PAD row masked out.
template <typename T>
class QgModel {
 public:
  struct Encoded {
    diff::Var states;    // hidden x n, projected encoder states
    diff::Var states_t;  // n x hidden
    std::vector<diff::LstmState> bridge;  // initial decoder state per layer
    std::size_t length = 0;
  };

  struct Attention {
    diff::Var alpha;    // n x 1
    diff::Var context;  // hidden x 1
  };

  using State = std::vector<diff::LstmState>;

  explicit QgModel(QgDims dims);
  QgModel(QgModel&&) noexcept = default;
  QgModel& operator=(QgModel&&) noexcept = default;

  const QgDims& dims() const { return dims_; }
  diff::ParamSet<T>& params() { return params_; }
  const diff::ParamSet<T>& params() const { return params_; }

  // `rng` drives dropout; pass nullptr for inference.
  Encoded encode(diff::Graph<T>& g, const SourceInput& source, diff::Rng* rng = nullptr) const;

  Attention attend(diff::Graph<T>& g, diff::Var h, const Encoded& enc) const;

  // Advances the decoder by one token; returns (vocab x 1) log-probabilities.
  diff::Var decode_step(diff::Graph<T>& g, std::int32_t prev, State& state, const Encoded& enc,
                        diff::Rng* rng = nullptr) const;

  // Teacher-forced NLL of question + EOS given the source (summed).
  diff::Var loss(diff::Graph<T>& g, const SourceInput& source, const std::vector<std::int32_t>& question,
                 diff::Rng* rng = nullptr) const;

 private:
  diff::Var output_logp(diff::Graph<T>& g, diff::Var h, diff::Var context) const;
  std::vector<diff::LstmState> bridge(diff::Graph<T>& g, diff::Var fwd_last, diff::Var bwd_first) const;

  QgDims dims_;
  diff::ParamSet<T> params_;
  diff::Parameter<T>* enc_embed_ = nullptr;
  diff::Parameter<T>* dec_embed_ = nullptr;
  std::vector<diff::LstmCell<T>> enc_fwd_;
  std::vector<diff::LstmCell<T>> enc_bwd_;
  std::vector<diff::LstmCell<T>> dec_;
  diff::Parameter<T>* proj_u_ = nullptr;
  diff::Parameter<T>* proj_c_ = nullptr;
  std::vector<diff::Parameter<T>*> bridge_w_;
  std::vector<diff::Parameter<T>*> bridge_b_;
  diff::Parameter<T>* out_wr_ = nullptr;
  diff::Parameter<T>* out_b_ = nullptr;
  diff::Parameter<T>* out_ws_ = nullptr;
};

struct GenerateOptions {
  std::size_t beam = 3;
  std::size_t max_length = 30;
};

struct Generation {
  std::vector<std::int32_t> ids;  // specials stripped
  double log_prob = 0.0;
  double avg_log_prob = 0.0;      // per emitted token, EOS included
};

// beam == 1 is greedy argmax (lowest id on ties); otherwise beam search with
// hypotheses closed at EOS and the best finished one chosen by average
// log-probability.
template <typename T>
Generation generate(const QgModel<T>& model, const SourceInput& source, GenerateOptions options = {});

// Hypothesis bookkeeping exposed for tests.
struct BeamHypothesis {
  std::vector<std::int32_t> ids;
  std::vector<double> step_log_probs;
  double log_prob = 0.0;
  bool finished = false;
};

template <typename T>
std::vector<BeamHypothesis> beam_search(const QgModel<T>& model, const SourceInput& source,
                                        GenerateOptions options);

std::vector<std::string> strip_specials(const std::vector<std::int32_t>& ids, const corpus::Vocabulary& vocab);

extern template class QgModel<float>;
extern template class QgModel<double>;

}  // namespace qapg::model
