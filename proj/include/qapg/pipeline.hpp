#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qapg/answersel.hpp"
#include "qapg/checkpoint.hpp"
#include "qapg/config.hpp"
#include "qapg/corpus.hpp"
#include "qapg/gradsuite.hpp"
#include "qapg/metrics.hpp"
#include "qapg/qgmodel.hpp"
#include "qapg/tasks.hpp"
#include "qapg/training.hpp"

namespace qapg::pipeline {

using checkpoint::ModelKind;
using config::ExperimentConfig;

// ---- model construction -----------------------------------------------------

// QG input: feature channels per variant, BIO block always present (forced
// to O for variants without answer encoding).
tasks::QgEncoding qg_encoding(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs);
// Answer models read words plus feature channels, never BIO.
model::FeatureSpec answer_spec(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs);

model::QgModel<float> make_qg(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs);
answer::PointerNet<float> make_pointer(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs);
answer::NeSelector<float> make_ne(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs);

// ---- prepare ----------------------------------------------------------------

struct PrepareOptions {
  std::string squad_path;
  std::string annotations_path;
  std::string out_dir;
  std::uint64_t seed = 13;
  double valid_fraction = 1.0 / 6.0;
  double test_fraction = 1.0 / 6.0;
  std::size_t max_vocab = 0;
};

struct PrepareReport {
  std::size_t records = 0;        // QA records read from SQuAD
  std::size_t written = 0;
  corpus::SkipReport skipped;     // dropped while reading SQuAD
  std::vector<std::string> errors;  // alignment failures, one per record or annotation line
  std::size_t train = 0, valid = 0, test = 0;
  double failure_rate = 0.0;

  std::string to_json() const;
};

// Writes train/valid/test.tsv, vocab.{words,pos,ner,dep}.txt and
// prepare_report.json into out_dir. Throws DataError when more than 1% of
// the records fail to align (the report is written first).
PrepareReport cmd_prepare(const PrepareOptions& options);

// Shuffled split with counts round(n * fraction) for valid and test.
struct Split {
  std::vector<corpus::Example> train, valid, test;
};
Split split_examples(std::vector<corpus::Example> examples, std::uint64_t seed, double valid_fraction,
                     double test_fraction);

// ---- train ------------------------------------------------------------------

struct TrainSummary {
  ModelKind kind = ModelKind::Qg;
  train::FitResult fit;
  std::size_t train_examples = 0;
  std::size_t valid_examples = 0;
  std::map<std::string, double> metrics;  // final train/valid figures

  std::string to_json() const;
};

// Validates the config against the data before training; writes the
// checkpoint to `out_path` and, when `run_dir` is non-empty, config.ini,
// epochs.jsonl and summary.json there.
TrainSummary cmd_train(const ExperimentConfig& cfg, ModelKind kind, const std::string& out_path,
                       const std::string& run_dir = {});

// Checks that the training data can serve the variant / model kind.
void validate_training_data(const ExperimentConfig& cfg, ModelKind kind, const std::vector<corpus::Example>& train);

// ---- select-answer ----------------------------------------------------------

struct SelectReport {
  std::size_t sentences = 0;
  std::size_t selected = 0;
  std::size_t fallback = 0;  // NE sentences without candidates routed to the fallback pointer
  std::size_t empty = 0;     // no span produced
};

// Rewrites the answer column (and BIO tags) of every line with the predicted
// span. `fallback_path` names a boundary/sequence checkpoint used for NE
// sentences that have no entity.
SelectReport cmd_select_answer(const std::string& checkpoint_path, const std::string& in_path,
                               const std::string& out_path, const std::string& fallback_path = {});

// In-memory form used by the file command.
std::vector<std::optional<corpus::AnswerSpan>> select_answers(const checkpoint::Checkpoint& ckpt,
                                                              const std::vector<corpus::Example>& examples,
                                                              const checkpoint::Checkpoint* fallback,
                                                              SelectReport* report = nullptr);

// ---- generate ---------------------------------------------------------------

struct GeneratedQuestion {
  std::vector<std::string> tokens;
  double log_prob = 0.0;
  double avg_log_prob = 0.0;
};

std::vector<GeneratedQuestion> generate_questions(const checkpoint::Checkpoint& ckpt,
                                                  const std::vector<corpus::Example>& examples,
                                                  model::GenerateOptions options);

// One question per line in out_path plus out_path + ".jsonl" with scores.
// beam == 0 takes the checkpoint config's beam width.
std::vector<GeneratedQuestion> cmd_generate(const std::string& checkpoint_path, const std::string& in_path,
                                            const std::string& out_path, std::size_t beam = 0);

// ---- evaluate ---------------------------------------------------------------

struct EvaluateOptions {
  metrics::BleuOptions bleu;
  metrics::MeteorOptions meteor;
};

// Candidates: one whitespace-tokenized question per line. References: a
// corpus file (question column) or one question per line.
metrics::MetricReport cmd_evaluate(const std::string& candidates_path, const std::string& references_path,
                                   const EvaluateOptions& options = {});

std::vector<metrics::Sentence> read_questions(const std::string& path);

std::map<std::string, double> cmd_human(const std::string& judgements_path);

// ---- gradcheck --------------------------------------------------------------

std::string format_grad_table(const std::vector<diff::GradSuiteRow>& rows, double tolerance);

}  // namespace qapg::pipeline
