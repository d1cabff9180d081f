#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace qapg::metrics {

using Sentence = std::vector<std::string>;

// ---- BLEU -----------------------------------------------------------------

struct BleuOptions {
  std::size_t max_n = 4;
  // Add-one smoothing of the n >= 2 precisions (sentence-level use).
  bool smoothing = false;
};

struct BleuResult {
  std::vector<double> scores;      // BLEU-1..BLEU-max_n, 0-100
  std::vector<double> precisions;  // modified n-gram precisions, 0-1
  double brevity_penalty = 1.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // sum of closest reference lengths
};

// Corpus BLEU: clipped n-gram counts are aggregated over all sentences; the
// brevity penalty uses the closest reference length (shorter on ties).
BleuResult bleu(const std::vector<Sentence>& candidates,
                const std::vector<std::vector<Sentence>>& references, BleuOptions options = {});

// Single-reference convenience overload.
BleuResult bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                BleuOptions options = {});

// ---- ROUGE-L --------------------------------------------------------------

std::size_t lcs_length(const Sentence& a, const Sentence& b);

// LCS-based F score with recall weight beta, scaled to 0-100.
double rouge_l(const Sentence& candidate, const Sentence& reference, double beta = 1.2);

double rouge_l_corpus(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                      double beta = 1.2);

// ---- METEOR-lite ----------------------------------------------------------

struct MeteorOptions {
  bool stemming = false;
};

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Crude suffix stripper used by the optional stemming stage.
std::string light_stem(std::string_view word);

// Maximum-cardinality unigram alignment with the fewest chunks.
MeteorAlignment meteor_align(const Sentence& candidate, const Sentence& reference,
                             MeteorOptions options = {});

// F_mean = 10PR / (R + 9P); penalty = 0.5 (chunks / matches)^3;
// score = 100 F_mean (1 - penalty).
double meteor_lite(const Sentence& candidate, const Sentence& reference, MeteorOptions options = {});

double meteor_corpus(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                     MeteorOptions options = {});

// ---- perplexity -----------------------------------------------------------

double perplexity_from_nll(double total_nll, std::size_t tokens);

// ---- human evaluation -----------------------------------------------------

struct Judgement {
  std::string rater;
  std::string question;
  std::string criterion;
  bool yes = false;
};

// Rows of rater<delim>question_id<delim>criterion<delim>{0|1}. A header row
// starting with "rater" is skipped.
std::vector<Judgement> parse_judgements(std::string_view text, char delimiter = ',');

// Per criterion: mean over raters of each rater's percentage of "yes".
// Throws DataError listing the missing (rater, question, criterion) cells.
std::map<std::string, double> human_eval_aggregate(const std::vector<Judgement>& judgements);

// ---- reports --------------------------------------------------------------

struct MetricReport {
  std::vector<double> bleu;  // BLEU-1..4
  double meteor = 0.0;
  double rouge_l = 0.0;
  std::size_t sentences = 0;
  std::size_t candidate_tokens = 0;
  std::size_t reference_tokens = 0;
  bool bleu_smoothing = false;
  std::string meteor_variant;

  std::string to_json() const;
  std::string to_text() const;
};

MetricReport evaluate(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                      BleuOptions bleu_options = {}, MeteorOptions meteor_options = {});

}  // namespace qapg::metrics
