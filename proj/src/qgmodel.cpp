#include "qapg/qgmodel.hpp"

#include <algorithm>
#include <numeric>

#include "qapg/errors.hpp"

namespace qapg::model {

using corpus::Vocabulary;
using diff::Graph;
using diff::LstmCell;
using diff::LstmState;
using diff::Var;

template <typename T>
QgModel<T>::QgModel(QgDims dims) : dims_(dims) {
  if (dims_.vocab_size <= Vocabulary::kNumSpecials) throw ContractViolation("QgModel: empty vocabulary");
  if (dims_.hidden == 0 || dims_.encoder_layers == 0 || dims_.decoder_layers == 0) {
    throw ContractViolation("QgModel: hidden size and layer counts must be positive");
  }
  if (dims_.input.word_dim == 0) throw ContractViolation("QgModel: word_dim must be positive");
  const auto h = dims_.hidden;
  const auto d = dims_.input.word_dim;
  enc_embed_ = &params_.add("encoder.embed", dims_.vocab_size, d, true);
  for (std::size_t l = 0; l < dims_.encoder_layers; ++l) {
    const auto in = l == 0 ? dims_.input.total() : 2 * h;
    const auto prefix = "encoder.layer" + std::to_string(l);
    enc_fwd_.push_back(LstmCell<T>::create(params_, prefix + ".fwd", in, h));
    enc_bwd_.push_back(LstmCell<T>::create(params_, prefix + ".bwd", in, h));
  }
  proj_u_ = &params_.add("encoder.proj.U", h, 2 * h);
  proj_c_ = &params_.add("encoder.proj.c", h, 1);
  dec_embed_ = &params_.add("decoder.embed", dims_.vocab_size, d, true);
  for (std::size_t l = 0; l < dims_.decoder_layers; ++l) {
    const auto suffix = "layer" + std::to_string(l);
    dec_.push_back(LstmCell<T>::create(params_, "decoder." + suffix, l == 0 ? d : h, h));
    bridge_w_.push_back(&params_.add("bridge." + suffix + ".W", h, 2 * h));
    bridge_b_.push_back(&params_.add("bridge." + suffix + ".b", h, 1));
  }
  out_wr_ = &params_.add("decoder.out.Wr", h, 2 * h);
  out_b_ = &params_.add("decoder.out.b", h, 1);
  out_ws_ = &params_.add("decoder.out.Ws", dims_.vocab_size, h);
}

template <typename T>
std::vector<LstmState> QgModel<T>::bridge(Graph<T>& g, Var fwd_last, Var bwd_first) const {
  const Var last = g.concat({fwd_last, bwd_first});
  std::vector<LstmState> init;
  for (std::size_t l = 0; l < dims_.decoder_layers; ++l) {
    const Var h = g.tanh(g.add(g.matmul(g.param(*bridge_w_[l]), last), g.param(*bridge_b_[l])));
    init.push_back({h, g.constant(diff::Tensor<T>(dims_.hidden, 1))});
  }
  return init;
}

template <typename T>
typename QgModel<T>::Encoded QgModel<T>::encode(Graph<T>& g, const SourceInput& source, diff::Rng* rng) const {
  if (source.size() == 0) throw ContractViolation("encode: empty sentence");
  const auto n = source.size();
  const auto h = dims_.hidden;
  Var x = embed_with_features(g, *enc_embed_, source, dims_.input);
  Var fwd_last, bwd_first;
  for (std::size_t l = 0; l < dims_.encoder_layers; ++l) {
    const auto fwd = diff::run_lstm(g, x, enc_fwd_[l], false, diff::zero_state(g, h));
    const auto bwd = diff::run_lstm(g, x, enc_bwd_[l], true, diff::zero_state(g, h));
    std::vector<Var> fh(n), bh(n);
    for (std::size_t t = 0; t < n; ++t) {
      fh[t] = fwd[t].h;
      bh[t] = bwd[t].h;
    }
    x = g.concat({g.hstack(fh), g.hstack(bh)});
    if (rng && l + 1 < dims_.encoder_layers) x = g.dropout(x, static_cast<T>(dims_.dropout), true, *rng);
    fwd_last = fwd[n - 1].h;
    bwd_first = bwd[0].h;
  }
  Encoded enc;
  enc.states = g.tanh(g.add_col(g.matmul(g.param(*proj_u_), x), g.param(*proj_c_)));
  enc.states_t = g.transpose(enc.states);
  enc.bridge = bridge(g, fwd_last, bwd_first);
  enc.length = n;
  return enc;
}

template <typename T>
typename QgModel<T>::Attention QgModel<T>::attend(Graph<T>& g, Var h, const Encoded& enc) const {
  if (g.shape(h) != diff::Shape{dims_.hidden, 1} || g.shape(enc.states).rows != dims_.hidden) {
    throw ContractViolation("attend: decoder state " + diff::to_string(g.shape(h)) +
                            " does not match encoder width " + std::to_string(g.shape(enc.states).rows));
  }
  Attention att;
  att.alpha = g.softmax(g.matmul(enc.states_t, h), 0);
  att.context = g.matmul(enc.states, att.alpha);
  return att;
}

template <typename T>
Var QgModel<T>::output_logp(Graph<T>& g, Var h, Var context) const {
  const Var combined = g.tanh(g.add_col(g.matmul(g.param(*out_wr_), g.concat({h, context})), g.param(*out_b_)));
  const std::size_t pad[] = {static_cast<std::size_t>(Vocabulary::kPad)};
  const Var logits = g.mask_rows(g.matmul(g.param(*out_ws_), combined), pad, T(-1e9));
  return g.log_softmax(logits);
}

template <typename T>
Var QgModel<T>::decode_step(Graph<T>& g, std::int32_t prev, State& state, const Encoded& enc,
                            diff::Rng* rng) const {
  if (state.size() != dims_.decoder_layers) throw ContractViolation("decode_step: wrong number of layer states");
  const std::int32_t ids[] = {prev};
  Var x = g.gather(*dec_embed_, ids);
  for (std::size_t l = 0; l < dims_.decoder_layers; ++l) {
    state[l] = diff::lstm_step(g, x, state[l], dec_[l]);
    x = state[l].h;
    if (rng && l + 1 < dims_.decoder_layers) x = g.dropout(x, static_cast<T>(dims_.dropout), true, *rng);
  }
  const auto att = attend(g, x, enc);
  return output_logp(g, x, att.context);
}

template <typename T>
Var QgModel<T>::loss(Graph<T>& g, const SourceInput& source, const std::vector<std::int32_t>& question,
                     diff::Rng* rng) const {
  const auto enc = encode(g, source, rng);
  std::vector<std::int32_t> inputs{Vocabulary::kBos};
  inputs.insert(inputs.end(), question.begin(), question.end());
  std::vector<std::int32_t> targets(question.begin(), question.end());
  targets.push_back(Vocabulary::kEos);

  // Without input feeding the decoder LSTM does not depend on attention, so
  // all steps run first and attention/output are batched over time.
  Var x = g.gather(*dec_embed_, inputs);
  for (std::size_t l = 0; l < dims_.decoder_layers; ++l) {
    const auto states = diff::run_lstm(g, x, dec_[l], false, enc.bridge[l]);
    std::vector<Var> hs;
    hs.reserve(states.size());
    for (const auto& s : states) hs.push_back(s.h);
    x = g.hstack(hs);
    if (rng && l + 1 < dims_.decoder_layers) x = g.dropout(x, static_cast<T>(dims_.dropout), true, *rng);
  }
  const Var alpha = g.softmax(g.matmul(enc.states_t, x), 0);
  const Var context = g.matmul(enc.states, alpha);
  return g.nll_loss(output_logp(g, x, context), targets, Vocabulary::kPad);
}

namespace {

template <typename T>
std::int32_t argmax_lowest(const diff::Tensor<T>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<std::int32_t>(best);
}

bool is_special(std::int32_t id) {
  return id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos;
}

Generation finish(const std::vector<std::int32_t>& emitted, double log_prob) {
  Generation out;
  for (auto id : emitted) {
    if (!is_special(id)) out.ids.push_back(id);
  }
  out.log_prob = log_prob;
  out.avg_log_prob = emitted.empty() ? 0.0 : log_prob / static_cast<double>(emitted.size());
  return out;
}

}  // namespace

template <typename T>
std::vector<BeamHypothesis> beam_search(const QgModel<T>& model, const SourceInput& source,
                                        GenerateOptions options) {
  if (options.beam == 0) throw ContractViolation("beam width must be >= 1");
  Graph<T> g(false);
  const auto enc = model.encode(g, source);

  struct Live {
    BeamHypothesis hyp;
    typename QgModel<T>::State state;
    std::int32_t last;
  };
  struct Candidate {
    double score;
    std::size_t from;
    std::int32_t token;
    double step_lp;
  };

  std::vector<Live> live{{BeamHypothesis{}, enc.bridge, Vocabulary::kBos}};
  std::vector<BeamHypothesis> finished;
  for (std::size_t step = 0; step < options.max_length && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const Var logp = model.decode_step(g, live[i].last, live[i].state, enc);
      const auto& v = g.value(logp);
      std::vector<std::int32_t> order(v.size());
      std::iota(order.begin(), order.end(), 0);
      const auto k = std::min(options.beam, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                        [&](std::int32_t a, std::int32_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
      for (std::size_t j = 0; j < k; ++j) {
        const double lp = static_cast<double>(v[order[j]]);
        cands.push_back({live[i].hyp.log_prob + lp, i, order[j], lp});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.from != b.from) return a.from < b.from;
      return a.token < b.token;
    });
    std::vector<Live> next;
    for (std::size_t c = 0; c < std::min(options.beam, cands.size()); ++c) {
      const auto& cand = cands[c];
      Live child = live[cand.from];
      child.hyp.ids.push_back(cand.token);
      child.hyp.step_log_probs.push_back(cand.step_lp);
      child.hyp.log_prob = cand.score;
      child.last = cand.token;
      if (cand.token == Vocabulary::kEos) {
        child.hyp.finished = true;
        finished.push_back(std::move(child.hyp));
      } else {
        next.push_back(std::move(child));
      }
    }
    live = std::move(next);
  }
  for (auto& l : live) finished.push_back(std::move(l.hyp));
  return finished;
}

template <typename T>
Generation generate(const QgModel<T>& model, const SourceInput& source, GenerateOptions options) {
  if (options.beam == 0) throw ContractViolation("beam width must be >= 1");
  if (options.beam == 1) {
    Graph<T> g(false);
    const auto enc = model.encode(g, source);
    auto state = enc.bridge;
    std::vector<std::int32_t> emitted;
    double lp = 0.0;
    std::int32_t prev = Vocabulary::kBos;
    for (std::size_t step = 0; step < options.max_length; ++step) {
      const auto& v = g.value(model.decode_step(g, prev, state, enc));
      prev = argmax_lowest(v);
      lp += static_cast<double>(v[static_cast<std::size_t>(prev)]);
      emitted.push_back(prev);
      if (prev == Vocabulary::kEos) break;
    }
    return finish(emitted, lp);
  }
  const auto hyps = beam_search(model, source, options);
  const BeamHypothesis* best = nullptr;
  double best_avg = 0.0;
  for (const auto& h : hyps) {
    const double avg = h.ids.empty() ? h.log_prob : h.log_prob / static_cast<double>(h.ids.size());
    if (best == nullptr || avg > best_avg) {
      best = &h;
      best_avg = avg;
    }
  }
  if (best == nullptr) return {};
  return finish(best->ids, best->log_prob);
}

std::vector<std::string> strip_specials(const std::vector<std::int32_t>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (!is_special(id)) out.push_back(vocab.token(id));
  }
  return out;
}

template class QgModel<float>;
template class QgModel<double>;
template Generation generate(const QgModel<float>&, const SourceInput&, GenerateOptions);
template Generation generate(const QgModel<double>&, const SourceInput&, GenerateOptions);
template std::vector<BeamHypothesis> beam_search(const QgModel<float>&, const SourceInput&, GenerateOptions);
template std::vector<BeamHypothesis> beam_search(const QgModel<double>&, const SourceInput&, GenerateOptions);

}  // namespace qapg::model
