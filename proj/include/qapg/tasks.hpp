#pragma once

#include <cstdint>
#include <vector>

#include "qapg/answersel.hpp"
#include "qapg/qgmodel.hpp"
#include "qapg/training.hpp"

namespace qapg::tasks {

using corpus::CorpusVocabularies;
using corpus::Example;

// What was truncated, dropped or mapped to UNK while encoding a dataset.
struct EncodeReport {
  std::size_t truncated_sources = 0;
  std::size_t truncated_questions = 0;
  std::size_t dropped_without_answer = 0;
  std::size_t dropped_without_question = 0;
  std::size_t dropped_without_candidate = 0;
  model::FeatureWarnings unknown_tags;
};

// ---- question generation ----------------------------------------------------

struct QgData {
  std::vector<model::SourceInput> sources;
  std::vector<std::vector<std::int32_t>> questions;

  std::size_t size() const { return sources.size(); }
};

struct QgEncoding {
  model::FeatureSpec spec;
  bool force_outside = false;  // variants without answer encoding
  std::size_t max_source = 100;
  std::size_t max_question = 30;
};

// Source side only (generation input).
model::SourceInput encode_sentence(const std::vector<corpus::TaggedToken>& sentence, const QgEncoding& enc,
                                   const CorpusVocabularies& vocabs, EncodeReport* report = nullptr);

// Examples without a question are dropped.
QgData encode_qg(const std::vector<Example>& examples, const QgEncoding& enc, const CorpusVocabularies& vocabs,
                 EncodeReport* report = nullptr);

// exp(mean NLL per target token), EOS included. Throws DataError when empty.
double perplexity(const model::QgModel<float>& model, const QgData& data);

train::FitResult train_qg(model::QgModel<float>& model, const QgData& train_data, const QgData* valid_data,
                          const train::FitOptions& options, const train::EpochCallback& on_epoch = {});

// ---- pointer networks -------------------------------------------------------

struct SpanData {
  std::vector<model::SourceInput> sources;
  std::vector<corpus::AnswerSpan> spans;

  std::size_t size() const { return sources.size(); }
};

// Examples without an answer span are dropped (counted in the report).
SpanData encode_spans(const std::vector<Example>& examples, const model::FeatureSpec& spec,
                      const CorpusVocabularies& vocabs, EncodeReport* report = nullptr);

double pointer_perplexity(const answer::PointerNet<float>& net, const SpanData& data, answer::PointerMode mode);

train::FitResult train_pointer(answer::PointerNet<float>& net, answer::PointerMode mode, const SpanData& train_data,
                               const SpanData* valid_data, const train::FitOptions& options,
                               const train::EpochCallback& on_epoch = {});

struct PointerScore {
  std::size_t total = 0;
  std::size_t exact = 0;       // predicted span == gold span
  std::size_t contiguous = 0;  // sequence mode: output is one increasing run

  double exact_rate() const { return total ? static_cast<double>(exact) / static_cast<double>(total) : 0.0; }
  double contiguous_rate() const {
    return total ? static_cast<double>(contiguous) / static_cast<double>(total) : 0.0;
  }
};

PointerScore score_pointer(const answer::PointerNet<float>& net, const SpanData& data, answer::PointerMode mode);

std::optional<corpus::AnswerSpan> predict_span(const answer::PointerNet<float>& net, const model::SourceInput& source,
                                               answer::PointerMode mode);

// ---- named-entity selector --------------------------------------------------

struct NeData {
  std::vector<model::SourceInput> sources;
  std::vector<std::vector<corpus::AnswerSpan>> candidates;
  std::vector<std::size_t> gold;

  std::size_t size() const { return sources.size(); }
};

// Keeps examples whose gold span is one of the sentence's entity runs.
NeData encode_ne(const std::vector<Example>& examples, const model::FeatureSpec& spec,
                 const CorpusVocabularies& vocabs, EncodeReport* report = nullptr);

train::FitResult train_ne(answer::NeSelector<float>& selector, const NeData& train_data, const NeData* valid_data,
                          const train::FitOptions& options, const train::EpochCallback& on_epoch = {});

double ne_accuracy(const answer::NeSelector<float>& selector, const NeData& data);

}  // namespace qapg::tasks
