#include "qapg/tasks.hpp"

#include <cmath>

#include "qapg/errors.hpp"

namespace qapg::tasks {

using answer::PointerMode;
using corpus::Vocabulary;
using diff::Graph;

model::SourceInput encode_sentence(const std::vector<corpus::TaggedToken>& sentence, const QgEncoding& enc,
                                   const CorpusVocabularies& vocabs, EncodeReport* report) {
  if (sentence.empty()) throw DataError("empty source sentence");
  std::vector<corpus::TaggedToken> tokens = sentence;
  if (tokens.size() > enc.max_source) {
    tokens.resize(enc.max_source);
    if (report) ++report->truncated_sources;
  }
  return model::encode_source(tokens, enc.spec, vocabs, report ? &report->unknown_tags : nullptr,
                              enc.force_outside);
}

QgData encode_qg(const std::vector<Example>& examples, const QgEncoding& enc, const CorpusVocabularies& vocabs,
                 EncodeReport* report) {
  QgData data;
  for (const auto& ex : examples) {
    if (ex.question.empty()) {
      if (report) ++report->dropped_without_question;
      continue;
    }
    data.sources.push_back(encode_sentence(ex.sentence, enc, vocabs, report));
    auto q = vocabs.words.encode(ex.question);
    if (q.size() > enc.max_question) {
      q.resize(enc.max_question);
      if (report) ++report->truncated_questions;
    }
    data.questions.push_back(std::move(q));
  }
  return data;
}

double perplexity(const model::QgModel<float>& model, const QgData& data) {
  if (data.size() == 0) throw DataError("perplexity of an empty dataset");
  double nll = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Graph<float> g(false);
    nll += static_cast<double>(g.scalar(model.loss(g, data.sources[i], data.questions[i])));
    tokens += data.questions[i].size() + 1;
  }
  return std::exp(nll / static_cast<double>(tokens));
}

train::FitResult train_qg(model::QgModel<float>& model, const QgData& train_data, const QgData* valid_data,
                          const train::FitOptions& options, const train::EpochCallback& on_epoch) {
  const bool dropout = model.dims().dropout > 0.0;
  auto loss = [&](Graph<float>& g, std::size_t i, diff::Rng& rng) {
    const auto l = model.loss(g, train_data.sources[i], train_data.questions[i], dropout ? &rng : nullptr);
    return std::make_pair(l, static_cast<double>(train_data.questions[i].size() + 1));
  };
  train::Validation validate;
  if (valid_data != nullptr && valid_data->size() > 0) {
    validate = [&] { return perplexity(model, *valid_data); };
  }
  return train::fit(model.params(), train_data.size(), loss, options, validate, on_epoch);
}

SpanData encode_spans(const std::vector<Example>& examples, const model::FeatureSpec& spec,
                      const CorpusVocabularies& vocabs, EncodeReport* report) {
  SpanData data;
  for (const auto& ex : examples) {
    if (!ex.answer) {
      if (report) ++report->dropped_without_answer;
      continue;
    }
    data.sources.push_back(model::encode_source(ex.sentence, spec, vocabs, report ? &report->unknown_tags : nullptr));
    data.spans.push_back(*ex.answer);
  }
  return data;
}

double pointer_perplexity(const answer::PointerNet<float>& net, const SpanData& data, PointerMode mode) {
  if (data.size() == 0) throw DataError("perplexity of an empty dataset");
  double nll = 0.0;
  std::size_t steps = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Graph<float> g(false);
    const auto targets = answer::pointer_targets(data.spans[i], data.sources[i].size(), mode);
    nll += static_cast<double>(g.scalar(net.loss(g, data.sources[i], targets)));
    steps += targets.size();
  }
  return std::exp(nll / static_cast<double>(steps));
}

train::FitResult train_pointer(answer::PointerNet<float>& net, PointerMode mode, const SpanData& train_data,
                               const SpanData* valid_data, const train::FitOptions& options,
                               const train::EpochCallback& on_epoch) {
  auto loss = [&](Graph<float>& g, std::size_t i, diff::Rng&) {
    const auto targets = answer::pointer_targets(train_data.spans[i], train_data.sources[i].size(), mode);
    return std::make_pair(net.loss(g, train_data.sources[i], targets), static_cast<double>(targets.size()));
  };
  train::Validation validate;
  if (valid_data != nullptr && valid_data->size() > 0) {
    validate = [&] { return pointer_perplexity(net, *valid_data, mode); };
  }
  return train::fit(net.params(), train_data.size(), loss, options, validate, on_epoch);
}

std::optional<corpus::AnswerSpan> predict_span(const answer::PointerNet<float>& net, const model::SourceInput& source,
                                               PointerMode mode) {
  answer::NetworkScorer<float> scorer(net, source);
  if (mode == PointerMode::Boundary) return answer::boundary_pointer_decode(scorer);
  return answer::sequence_to_span(answer::sequence_pointer_decode(scorer));
}

PointerScore score_pointer(const answer::PointerNet<float>& net, const SpanData& data, PointerMode mode) {
  PointerScore score;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++score.total;
    answer::NetworkScorer<float> scorer(net, data.sources[i]);
    const auto& gold = data.spans[i];
    if (mode == PointerMode::Boundary) {
      if (answer::boundary_pointer_decode(scorer) == gold) ++score.exact;
      continue;
    }
    const auto out = answer::sequence_pointer_decode(scorer);
    if (answer::is_contiguous(out)) ++score.contiguous;
    const auto span = answer::sequence_to_span(out);
    if (answer::is_contiguous(out) && span && *span == gold) ++score.exact;
  }
  return score;
}

NeData encode_ne(const std::vector<Example>& examples, const model::FeatureSpec& spec,
                 const CorpusVocabularies& vocabs, EncodeReport* report) {
  NeData data;
  for (const auto& ex : examples) {
    if (!ex.answer) {
      if (report) ++report->dropped_without_answer;
      continue;
    }
    auto cands = answer::candidate_entities(ex.sentence);
    const auto it = std::find(cands.begin(), cands.end(), *ex.answer);
    if (it == cands.end()) {
      if (report) ++report->dropped_without_candidate;
      continue;
    }
    data.sources.push_back(model::encode_source(ex.sentence, spec, vocabs, report ? &report->unknown_tags : nullptr));
    data.gold.push_back(static_cast<std::size_t>(it - cands.begin()));
    data.candidates.push_back(std::move(cands));
  }
  return data;
}

train::FitResult train_ne(answer::NeSelector<float>& selector, const NeData& train_data, const NeData* valid_data,
                          const train::FitOptions& options, const train::EpochCallback& on_epoch) {
  auto loss = [&](Graph<float>& g, std::size_t i, diff::Rng&) {
    return std::make_pair(selector.loss(g, train_data.sources[i], train_data.candidates[i], train_data.gold[i]), 1.0);
  };
  train::Validation validate;
  if (valid_data != nullptr && valid_data->size() > 0) {
    validate = [&] {
      double nll = 0.0;
      for (std::size_t i = 0; i < valid_data->size(); ++i) {
        const auto p = selector.probabilities(valid_data->sources[i], valid_data->candidates[i]);
        nll -= std::log(std::max(p[valid_data->gold[i]], 1e-12));
      }
      return std::exp(nll / static_cast<double>(valid_data->size()));
    };
  }
  return train::fit(selector.params(), train_data.size(), loss, options, validate, on_epoch);
}

double ne_accuracy(const answer::NeSelector<float>& selector, const NeData& data) {
  if (data.size() == 0) throw DataError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = selector.probabilities(data.sources[i], data.candidates[i]);
    if (answer::argmax_lowest(p) == data.gold[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace qapg::tasks
