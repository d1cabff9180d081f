#include "qapg/answersel.hpp"

#include <cmath>
#include <limits>

namespace qapg::answer {

using diff::Graph;
using diff::LstmCell;
using diff::Tensor;
using diff::Var;

std::vector<AnswerSpan> candidate_entities(const std::vector<corpus::TaggedToken>& sentence) {
  std::vector<AnswerSpan> spans;
  std::size_t i = 0;
  while (i < sentence.size()) {
    if (sentence[i].ner == "O") {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < sentence.size() && sentence[j + 1].ner == sentence[i].ner) ++j;
    spans.push_back({i + 1, j + 1});
    i = j + 1;
  }
  return spans;
}

std::size_t argmax_lowest(const std::vector<double>& values) {
  if (values.empty()) throw ContractViolation("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw ContractViolation("softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw ContractViolation("softmax: no finite logit");
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

// ---- NE selector ------------------------------------------------------------

template <typename T>
NeSelector<T>::NeSelector(NeDims dims) : dims_(dims) {
  if (dims_.vocab_size == 0 || dims_.hidden == 0 || dims_.layers == 0 || dims_.input.word_dim == 0) {
    throw ContractViolation("NeSelector: dimensions must be positive");
  }
  embed_ = &params_.add("ne.embed", dims_.vocab_size, dims_.input.word_dim, true);
  for (std::size_t l = 0; l < dims_.layers; ++l) {
    layers_.push_back(LstmCell<T>::create(params_, "ne.encoder.layer" + std::to_string(l),
                                          l == 0 ? dims_.input.total() : dims_.hidden, dims_.hidden));
  }
  const auto r = 3 * dims_.hidden;
  if (dims_.mlp_hidden > 0) {
    w1_ = &params_.add("ne.mlp.W1", dims_.mlp_hidden, r);
    b1_ = &params_.add("ne.mlp.b1", dims_.mlp_hidden, 1);
    w_ = &params_.add("ne.mlp.W", 1, dims_.mlp_hidden);
  } else {
    w_ = &params_.add("ne.mlp.W", 1, r);
  }
  bias_ = &params_.add("ne.mlp.B", 1, 1);
}

template <typename T>
Var NeSelector<T>::representations(Graph<T>& g, const SourceInput& source,
                                   const std::vector<AnswerSpan>& candidates) const {
  const auto n = source.size();
  if (n == 0) throw ContractViolation("ne_select: empty sentence");
  if (candidates.empty()) throw NoCandidates();
  for (const auto& c : candidates) {
    if (!c.valid_for(n)) throw ContractViolation("ne_select: candidate " + corpus::format_span(c) + " out of range");
  }
  const auto k = candidates.size();
  Var x = model::embed_with_features(g, *embed_, source, dims_.input);
  for (const auto& cell : layers_) {
    const auto states = diff::run_lstm(g, x, cell, false, diff::zero_state(g, dims_.hidden));
    std::vector<Var> hs;
    hs.reserve(n);
    for (const auto& s : states) hs.push_back(s.h);
    x = g.hstack(hs);
  }
  Tensor<T> avg(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto len = static_cast<T>(candidates[j].length());
    for (auto t = candidates[j].start; t <= candidates[j].end; ++t) avg(t - 1, j) = T(1) / len;
  }
  const Var ones = g.constant(Tensor<T>(1, k, T(1)));
  const Var last = g.matmul(g.column(x, n - 1), ones);
  const Var mean = g.matmul(g.mean_cols(x), ones);
  const Var span_mean = g.matmul(x, g.constant(std::move(avg)));
  return g.concat({last, mean, span_mean});
}

template <typename T>
Var NeSelector<T>::logits(Graph<T>& g, const SourceInput& source, const std::vector<AnswerSpan>& candidates) const {
  Var r = representations(g, source, candidates);
  if (w1_ != nullptr) r = g.tanh(g.add_col(g.matmul(g.param(*w1_), r), g.param(*b1_)));
  const Var ones = g.constant(Tensor<T>(1, candidates.size(), T(1)));
  const Var row = g.add(g.matmul(g.param(*w_), r), g.matmul(g.param(*bias_), ones));
  return g.transpose(row);
}

template <typename T>
Var NeSelector<T>::loss(Graph<T>& g, const SourceInput& source, const std::vector<AnswerSpan>& candidates,
                        std::size_t gold) const {
  if (gold >= candidates.size()) throw ContractViolation("ne_select: gold index out of range");
  const std::int32_t target[] = {static_cast<std::int32_t>(gold)};
  return g.nll_loss(g.log_softmax(logits(g, source, candidates)), target, -1);
}

template <typename T>
std::vector<double> NeSelector<T>::probabilities(const SourceInput& source,
                                                 const std::vector<AnswerSpan>& candidates) const {
  if (candidates.empty()) throw NoCandidates();
  Graph<T> g(false);
  const auto& u = g.value(logits(g, source, candidates));
  std::vector<double> values(u.values().begin(), u.values().end());
  return softmax(values);
}

// ---- pointer networks -------------------------------------------------------

const char* to_string(PointerMode mode) {
  return mode == PointerMode::Sequence ? "sequence" : "boundary";
}

template <typename T>
PointerNet<T>::PointerNet(PointerDims dims) : dims_(dims) {
  if (dims_.vocab_size == 0 || dims_.hidden == 0 || dims_.decoder_hidden == 0 || dims_.attention == 0 ||
      dims_.input.word_dim == 0) {
    throw ContractViolation("PointerNet: dimensions must be positive");
  }
  const auto h2 = 2 * dims_.hidden;
  embed_ = &params_.add("pointer.embed", dims_.vocab_size, dims_.input.word_dim, true);
  fwd_ = LstmCell<T>::create(params_, "pointer.encoder.fwd", dims_.input.total(), dims_.hidden);
  bwd_ = LstmCell<T>::create(params_, "pointer.encoder.bwd", dims_.input.total(), dims_.hidden);
  dec_ = LstmCell<T>::create(params_, "pointer.decoder", h2 + dims_.decoder_hidden, dims_.decoder_hidden);
  we_ = &params_.add("pointer.We", dims_.attention, h2);
  wd_ = &params_.add("pointer.Wd", dims_.attention, dims_.decoder_hidden);
  v_ = &params_.add("pointer.v", dims_.attention, 1);
}

template <typename T>
typename PointerNet<T>::Encoded PointerNet<T>::encode(Graph<T>& g, const SourceInput& source) const {
  const auto n = source.size();
  if (n == 0) throw ContractViolation("pointer encode: empty sentence");
  const Var x = model::embed_with_features(g, *embed_, source, dims_.input);
  const auto fwd = diff::run_lstm(g, x, fwd_, false, diff::zero_state(g, dims_.hidden));
  const auto bwd = diff::run_lstm(g, x, bwd_, true, diff::zero_state(g, dims_.hidden));
  std::vector<Var> fh(n), bh(n);
  for (std::size_t t = 0; t < n; ++t) {
    fh[t] = fwd[t].h;
    bh[t] = bwd[t].h;
  }
  const Var h = g.concat({g.hstack(fh), g.hstack(bh)});
  Encoded enc;
  enc.hhat = g.hstack(std::vector<Var>{h, g.constant(Tensor<T>(2 * dims_.hidden, 1))});
  enc.we_h = g.matmul(g.param(*we_), enc.hhat);
  enc.length = n;
  return enc;
}

template <typename T>
typename PointerNet<T>::DecoderState PointerNet<T>::initial_state(Graph<T>& g) const {
  return {diff::zero_state(g, dims_.decoder_hidden), g.constant(Tensor<T>(2 * dims_.hidden, 1))};
}

template <typename T>
Var PointerNet<T>::scores(Graph<T>& g, const Encoded& enc, Var d) const {
  if (g.shape(d) != diff::Shape{dims_.decoder_hidden, 1}) {
    throw ContractViolation("pn_scores: decoder state " + diff::to_string(g.shape(d)) + " does not match " +
                            wd_->name);
  }
  if (g.shape(enc.we_h).rows != dims_.attention) {
    throw ContractViolation("pn_scores: encoder projection does not match " + we_->name);
  }
  const Var pre = g.tanh(g.add_col(enc.we_h, g.matmul(g.param(*wd_), d)));
  return g.transpose(g.matmul(g.transpose(g.param(*v_)), pre));
}

template <typename T>
Var PointerNet<T>::step(Graph<T>& g, const Encoded& enc, DecoderState& state) const {
  state.lstm = diff::lstm_step(g, g.concat({state.read, state.lstm.h}), state.lstm, dec_);
  const Var u = scores(g, enc, state.lstm.h);
  state.read = g.matmul(enc.hhat, g.softmax(u, 0));
  return u;
}

template <typename T>
Var PointerNet<T>::loss(Graph<T>& g, const SourceInput& source, const std::vector<std::size_t>& targets) const {
  if (targets.empty()) throw ContractViolation("pointer loss: no targets");
  const auto enc = encode(g, source);
  auto state = initial_state(g);
  Var total;
  for (auto t : targets) {
    if (t > enc.length) throw ContractViolation("pointer loss: target beyond the end position");
    const std::int32_t target[] = {static_cast<std::int32_t>(t)};
    const Var l = g.nll_loss(g.log_softmax(step(g, enc, state)), target, -1);
    total = total.valid() ? g.add(total, l) : l;
  }
  return total;
}

std::vector<std::size_t> pointer_targets(const AnswerSpan& span, std::size_t length, PointerMode mode) {
  if (!span.valid_for(length)) {
    throw ContractViolation("gold span " + corpus::format_span(span) + " exceeds sentence length " +
                            std::to_string(length));
  }
  if (mode == PointerMode::Boundary) return {span.start - 1, span.end - 1};
  std::vector<std::size_t> out;
  for (auto i = span.start; i <= span.end; ++i) out.push_back(i - 1);
  out.push_back(length);
  return out;
}

template <typename T>
NetworkScorer<T>::NetworkScorer(const PointerNet<T>& net, const SourceInput& source)
    : net_(net), enc_(net.encode(g_, source)), state_(net.initial_state(g_)) {}

template <typename T>
std::vector<double> NetworkScorer<T>::next_logits() {
  const auto& u = g_.value(net_.step(g_, enc_, state_));
  return {u.values().begin(), u.values().end()};
}

ForcedScorer::ForcedScorer(std::size_t length, std::vector<std::size_t> choices)
    : length_(length), choices_(std::move(choices)) {
  for (auto c : choices_) {
    if (c < 1 || c > length_) throw ContractViolation("forced pointer choice out of range");
  }
}

std::vector<double> ForcedScorer::next_logits() {
  std::vector<double> u(length_ + 1, 0.0);
  u[step_ < choices_.size() ? choices_[step_] - 1 : length_] = 1.0;
  ++step_;
  return u;
}

namespace {

std::vector<double> masked_softmax(std::vector<double> logits, const std::vector<bool>& allowed) {
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!allowed[i]) logits[i] = -std::numeric_limits<double>::infinity();
  }
  return softmax(logits);
}

std::vector<double> checked_logits(PointerScorer& scorer) {
  auto u = scorer.next_logits();
  if (u.size() != scorer.length() + 1) throw ContractViolation("pointer scorer returned wrong arity");
  return u;
}

}  // namespace

std::vector<std::size_t> sequence_pointer_decode(PointerScorer& scorer, std::size_t step_cap, StepTrace* trace) {
  const auto n = scorer.length();
  std::vector<std::size_t> out;
  for (std::size_t step = 0; step < step_cap; ++step) {
    const auto p = softmax(checked_logits(scorer));
    if (trace) trace->push_back(p);
    const auto best = argmax_lowest(p);
    if (best == n) break;
    out.push_back(best + 1);
  }
  return out;
}

AnswerSpan boundary_pointer_decode(PointerScorer& scorer, StepTrace* trace) {
  const auto n = scorer.length();
  if (n == 0) throw ContractViolation("boundary decode: empty sentence");
  std::vector<bool> allowed(n + 1, true);
  allowed[n] = false;
  const auto p1 = masked_softmax(checked_logits(scorer), allowed);
  const auto start = argmax_lowest(p1);
  for (std::size_t i = 0; i < start; ++i) allowed[i] = false;
  const auto p2 = masked_softmax(checked_logits(scorer), allowed);
  const auto end = argmax_lowest(p2);
  if (trace) {
    trace->push_back(p1);
    trace->push_back(p2);
  }
  return {start + 1, end + 1};
}

std::vector<std::string> indices_to_tokens(const std::vector<std::string>& words,
                                           const std::vector<std::size_t>& indices) {
  std::vector<std::string> out;
  for (auto i : indices) {
    if (i < 1 || i > words.size()) throw ContractViolation("pointer index " + std::to_string(i) + " out of range");
    out.push_back(words[i - 1]);
  }
  return out;
}

bool is_contiguous(const std::vector<std::size_t>& indices) {
  if (indices.empty()) return false;
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] != indices[i - 1] + 1) return false;
  }
  return true;
}

std::optional<AnswerSpan> sequence_to_span(const std::vector<std::size_t>& indices) {
  if (indices.empty()) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(indices.begin(), indices.end());
  return AnswerSpan{*lo, *hi};
}

template class NeSelector<float>;
template class NeSelector<double>;
template class PointerNet<float>;
template class PointerNet<double>;
template class NetworkScorer<float>;
template class NetworkScorer<double>;

}  // namespace qapg::answer
