#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "qapg/errors.hpp"
#include "qapg/features.hpp"
#include "qapg/lstm.hpp"

namespace qapg::answer {

using corpus::AnswerSpan;
using model::FeatureSpec;
using model::SourceInput;

// Raised by the NE selector when a sentence has no entity; callers fall back
// to the boundary pointer.
class NoCandidates : public DataError {
 public:
  NoCandidates() : DataError("sentence has no named-entity candidates") {}
};

// Maximal runs of identical non-O NER tags, in sentence order (1-based).
std::vector<AnswerSpan> candidate_entities(const std::vector<corpus::TaggedToken>& sentence);

// First index of the maximum.
std::size_t argmax_lowest(const std::vector<double>& values);

std::vector<double> softmax(const std::vector<double>& logits);

// ---- named-entity selector ------------------------------------------------

struct NeDims {
  FeatureSpec input;
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t mlp_hidden = 0;  // 0: linear scorer R.W + B
};

// 2-layer unidirectional LSTM encoder; per candidate R = [h_n; mean H;
// mean H over the span] scored by an MLP, softmax across candidates.
template <typename T>
class NeSelector {
 public:
  explicit NeSelector(NeDims dims);
  NeSelector(NeSelector&&) noexcept = default;

  const NeDims& dims() const { return dims_; }
  diff::ParamSet<T>& params() { return params_; }
  const diff::ParamSet<T>& params() const { return params_; }

  // (3 hidden x k) candidate representations.
  diff::Var representations(diff::Graph<T>& g, const SourceInput& source,
                            const std::vector<AnswerSpan>& candidates) const;
  // (k x 1) logits.
  diff::Var logits(diff::Graph<T>& g, const SourceInput& source, const std::vector<AnswerSpan>& candidates) const;
  diff::Var loss(diff::Graph<T>& g, const SourceInput& source, const std::vector<AnswerSpan>& candidates,
                 std::size_t gold) const;

  // Throws NoCandidates on an empty list.
  std::vector<double> probabilities(const SourceInput& source, const std::vector<AnswerSpan>& candidates) const;

 private:
  NeDims dims_;
  diff::ParamSet<T> params_;
  diff::Parameter<T>* embed_ = nullptr;
  std::vector<diff::LstmCell<T>> layers_;
  diff::Parameter<T>* w1_ = nullptr;
  diff::Parameter<T>* b1_ = nullptr;
  diff::Parameter<T>* w_ = nullptr;
  diff::Parameter<T>* bias_ = nullptr;
};

// ---- pointer networks -----------------------------------------------------

enum class PointerMode { Sequence, Boundary };

const char* to_string(PointerMode mode);

struct PointerDims {
  FeatureSpec input;
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;          // per encoder direction
  std::size_t decoder_hidden = 64;
  std::size_t attention = 64;
};

// Bidirectional LSTM encoder; H-hat appends a zero end column. Scores are
// u = v^T tanh(We H-hat + Wd D_i); the decoder LSTM reads
// [softmax(u_{i-1}) H-hat; D_{i-1}] with D_0 = 0 and a zero first read.
template <typename T>
class PointerNet {
 public:
  struct Encoded {
    diff::Var hhat;  // 2 hidden x (n + 1)
    diff::Var we_h;  // attention x (n + 1)
    std::size_t length = 0;
  };

  struct DecoderState {
    diff::LstmState lstm;
    diff::Var read;  // 2 hidden x 1
  };

  explicit PointerNet(PointerDims dims);
  PointerNet(PointerNet&&) noexcept = default;

  const PointerDims& dims() const { return dims_; }
  diff::ParamSet<T>& params() { return params_; }
  const diff::ParamSet<T>& params() const { return params_; }

  Encoded encode(diff::Graph<T>& g, const SourceInput& source) const;
  DecoderState initial_state(diff::Graph<T>& g) const;
  // u over the n + 1 positions for decoder state d (decoder_hidden x 1).
  diff::Var scores(diff::Graph<T>& g, const Encoded& enc, diff::Var d) const;
  // Advances the decoder one step and returns the logits of that step.
  diff::Var step(diff::Graph<T>& g, const Encoded& enc, DecoderState& state) const;

  // Summed NLL of 0-based target positions (n denotes the end position).
  diff::Var loss(diff::Graph<T>& g, const SourceInput& source, const std::vector<std::size_t>& targets) const;

 private:
  PointerDims dims_;
  diff::ParamSet<T> params_;
  diff::Parameter<T>* embed_ = nullptr;
  diff::LstmCell<T> fwd_;
  diff::LstmCell<T> bwd_;
  diff::LstmCell<T> dec_;
  diff::Parameter<T>* we_ = nullptr;
  diff::Parameter<T>* wd_ = nullptr;
  diff::Parameter<T>* v_ = nullptr;
};

// Gold targets as 0-based positions: boundary (start, end); sequence
// start..end then the end position n.
std::vector<std::size_t> pointer_targets(const AnswerSpan& span, std::size_t length, PointerMode mode);

// Source of per-step pointer logits over n + 1 positions (last = end).
class PointerScorer {
 public:
  virtual ~PointerScorer() = default;
  virtual std::size_t length() const = 0;
  virtual std::vector<double> next_logits() = 0;
};

// Network-backed scorer; inference only.
template <typename T>
class NetworkScorer : public PointerScorer {
 public:
  NetworkScorer(const PointerNet<T>& net, const SourceInput& source);
  std::size_t length() const override { return enc_.length; }
  std::vector<double> next_logits() override;

 private:
  const PointerNet<T>& net_;
  diff::Graph<T> g_{false};
  typename PointerNet<T>::Encoded enc_;
  typename PointerNet<T>::DecoderState state_;
};

// Replays fixed 1-based choices, then points at the end position.
class ForcedScorer : public PointerScorer {
 public:
  ForcedScorer(std::size_t length, std::vector<std::size_t> choices);
  std::size_t length() const override { return length_; }
  std::vector<double> next_logits() override;

 private:
  std::size_t length_;
  std::vector<std::size_t> choices_;
  std::size_t step_ = 0;
};

// Pointer distributions observed during decoding (after masking).
using StepTrace = std::vector<std::vector<double>>;

// Greedy; stops at the end position or after `step_cap` steps. 1-based.
std::vector<std::size_t> sequence_pointer_decode(PointerScorer& scorer, std::size_t step_cap = 10,
                                                 StepTrace* trace = nullptr);

// Two steps: start over tokens (end masked), then end over positions >= start.
AnswerSpan boundary_pointer_decode(PointerScorer& scorer, StepTrace* trace = nullptr);

// Words at 1-based indices.
std::vector<std::string> indices_to_tokens(const std::vector<std::string>& words,
                                           const std::vector<std::size_t>& indices);

bool is_contiguous(const std::vector<std::size_t>& indices);

// Span covering a sequence-pointer output; none when the output is empty.
std::optional<AnswerSpan> sequence_to_span(const std::vector<std::size_t>& indices);

extern template class NeSelector<float>;
extern template class NeSelector<double>;
extern template class PointerNet<float>;
extern template class PointerNet<double>;
extern template class NetworkScorer<float>;
extern template class NetworkScorer<double>;

}  // namespace qapg::answer
