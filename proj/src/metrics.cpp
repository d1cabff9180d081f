#include "qapg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "qapg/errors.hpp"

namespace qapg::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[std::vector<std::string>(s.begin() + static_cast<long>(i),
                                      s.begin() + static_cast<long>(i + n))];
  }
  return counts;
}

void require_same_size(std::size_t a, std::size_t b) {
  if (a == 0) throw DataError("cannot score an empty corpus");
  if (a != b) {
    throw DataError("candidate/reference count mismatch: " + std::to_string(a) + " vs " +
                    std::to_string(b));
  }
}

}  // namespace

BleuResult bleu(const std::vector<Sentence>& candidates,
                const std::vector<std::vector<Sentence>>& references, BleuOptions options) {
  require_same_size(candidates.size(), references.size());
  if (options.max_n == 0) throw ContractViolation("bleu: max_n must be >= 1");

  std::vector<std::size_t> matched(options.max_n, 0);
  std::vector<std::size_t> total(options.max_n, 0);
  BleuResult result;

  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& refs = references[s];
    if (refs.empty()) throw DataError("candidate " + std::to_string(s + 1) + " has no reference");
    result.candidate_length += cand.size();

    std::size_t closest = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) {
        closest = r.size();
      }
    }
    result.reference_length += closest;

    for (std::size_t n = 1; n <= options.max_n; ++n) {
      const auto cand_counts = ngrams(cand, n);
      NgramCounts max_ref;
      for (const auto& r : refs) {
        for (const auto& [gram, c] : ngrams(r, n)) max_ref[gram] = std::max(max_ref[gram], c);
      }
      for (const auto& [gram, c] : cand_counts) {
        total[n - 1] += c;
        const auto it = max_ref.find(gram);
        if (it != max_ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }

  const double c = static_cast<double>(result.candidate_length);
  const double r = static_cast<double>(result.reference_length);
  if (c == 0.0) {
    result.brevity_penalty = 0.0;
  } else if (c < r) {
    result.brevity_penalty = std::exp(1.0 - r / c);
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= options.max_n; ++n) {
    double num = static_cast<double>(matched[n - 1]);
    double den = static_cast<double>(total[n - 1]);
    if (options.smoothing && n >= 2) {
      num += 1.0;
      den += 1.0;
    }
    const double p = den > 0.0 ? num / den : 0.0;
    result.precisions.push_back(p);
    if (p <= 0.0) zero = true;
    if (!zero) log_sum += std::log(p);
    const double score = zero ? 0.0 : result.brevity_penalty * std::exp(log_sum / static_cast<double>(n));
    result.scores.push_back(std::clamp(100.0 * score, 0.0, 100.0));
  }
  return result;
}

BleuResult bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                BleuOptions options) {
  std::vector<std::vector<Sentence>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back({r});
  return bleu(candidates, refs, options);
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Sentence& candidate, const Sentence& reference, double beta) {
  if (reference.empty()) throw DataError("rouge_l: empty reference");
  if (candidate.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return 100.0 * (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l_corpus(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                      double beta) {
  require_same_size(candidates.size(), references.size());
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) total += rouge_l(candidates[i], references[i], beta);
  return total / static_cast<double>(candidates.size());
}

std::string light_stem(std::string_view word) {
  std::string w(word);
  auto ends_with = [&](std::string_view suffix) {
    return w.size() > suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (w.size() > 4 && ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
  if (w.size() > 5 && ends_with("ing")) return w.substr(0, w.size() - 3);
  if (w.size() > 4 && ends_with("ed")) return w.substr(0, w.size() - 2);
  if (w.size() > 4 && ends_with("ly")) return w.substr(0, w.size() - 2);
  if (w.size() > 4 && ends_with("es")) return w.substr(0, w.size() - 2);
  if (w.size() > 3 && ends_with("s") && !ends_with("ss")) return w.substr(0, w.size() - 1);
  return w;
}

namespace {

// Branch and bound over candidate positions. A candidate token may stay
// unaligned only while enough same-key tokens remain to reach the maximum
// match count, so every leaf is a maximum-cardinality alignment.
class ChunkSearch {
 public:
  ChunkSearch(std::vector<std::string> cand, std::vector<std::string> ref)
      : cand_(std::move(cand)), ref_(std::move(ref)), used_(ref_.size(), 0) {
    std::unordered_map<std::string, std::size_t> cand_count, ref_count;
    for (const auto& w : cand_) ++cand_count[w];
    for (const auto& w : ref_) ++ref_count[w];
    for (const auto& [w, c] : cand_count) {
      const auto it = ref_count.find(w);
      const std::size_t m = it == ref_count.end() ? 0 : std::min(c, it->second);
      needed_[w] = m;
      max_matches_ += m;
    }
    remaining_ = cand_count;
    for (std::size_t j = 0; j < ref_.size(); ++j) positions_[ref_[j]].push_back(j);
  }

  MeteorAlignment run() {
    if (max_matches_ == 0) return {0, 0};
    recurse(0, std::numeric_limits<std::size_t>::max(), 0);
    return {max_matches_, best_};
  }

 private:
  void recurse(std::size_t i, std::size_t prev_j, std::size_t chunks) {
    if (chunks >= best_) return;
    if (budget_ == 0) return;
    --budget_;
    if (i == cand_.size()) {
      best_ = chunks;
      return;
    }
    const auto& w = cand_[i];
    --remaining_[w];
    auto& need = needed_[w];
    const auto pos_it = positions_.find(w);
    if (need > 0 && pos_it != positions_.end()) {
      // Continuation of the current chunk first, then the rest in order.
      std::vector<std::size_t> options;
      const bool can_extend = prev_j != std::numeric_limits<std::size_t>::max() &&
                              prev_j + 1 < ref_.size() && ref_[prev_j + 1] == w && !used_[prev_j + 1];
      if (can_extend) options.push_back(prev_j + 1);
      for (auto j : pos_it->second) {
        if (!used_[j] && !(can_extend && j == prev_j + 1)) options.push_back(j);
      }
      for (auto j : options) {
        used_[j] = 1;
        --need;
        const bool extends = prev_j != std::numeric_limits<std::size_t>::max() && j == prev_j + 1;
        recurse(i + 1, j, chunks + (extends ? 0 : 1));
        ++need;
        used_[j] = 0;
      }
    }
    // Leave token i unaligned if the remaining tokens can still cover `need`.
    if (remaining_[w] >= need) recurse(i + 1, std::numeric_limits<std::size_t>::max(), chunks);
    ++remaining_[w];
  }

  std::vector<std::string> cand_;
  std::vector<std::string> ref_;
  std::vector<char> used_;
  std::unordered_map<std::string, std::size_t> needed_;
  std::unordered_map<std::string, std::size_t> remaining_;
  std::unordered_map<std::string, std::vector<std::size_t>> positions_;
  std::size_t max_matches_ = 0;
  std::size_t best_ = std::numeric_limits<std::size_t>::max();
  std::size_t budget_ = 2'000'000;
};

std::vector<std::string> keys(const Sentence& s, bool stemming) {
  if (!stemming) return s;
  std::vector<std::string> out;
  out.reserve(s.size());
  for (const auto& w : s) out.push_back(light_stem(w));
  return out;
}

}  // namespace

MeteorAlignment meteor_align(const Sentence& candidate, const Sentence& reference,
                             MeteorOptions options) {
  return ChunkSearch(keys(candidate, options.stemming), keys(reference, options.stemming)).run();
}

double meteor_lite(const Sentence& candidate, const Sentence& reference, MeteorOptions options) {
  if (reference.empty()) throw DataError("meteor: empty reference");
  const auto a = meteor_align(candidate, reference, options);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);
  const double penalty = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3.0);
  return 100.0 * f_mean * (1.0 - penalty);
}

double meteor_corpus(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                     MeteorOptions options) {
  require_same_size(candidates.size(), references.size());
  double total = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    total += meteor_lite(candidates[i], references[i], options);
  }
  return total / static_cast<double>(candidates.size());
}

double perplexity_from_nll(double total_nll, std::size_t tokens) {
  if (tokens == 0) throw DataError("perplexity of an empty dataset");
  return std::exp(total_nll / static_cast<double>(tokens));
}

std::vector<Judgement> parse_judgements(std::string_view text, char delimiter) {
  std::vector<Judgement> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, delimiter);) fields.push_back(f);
    if (line_number == 1 && !fields.empty() && fields[0] == "rater") continue;
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields in judgement row", line_number, fields.size() + 1);
    }
    if (fields[3] != "0" && fields[3] != "1") {
      throw ParseError("judgement must be 0 or 1", line_number, 4);
    }
    out.push_back({fields[0], fields[1], fields[2], fields[3] == "1"});
  }
  return out;
}

std::map<std::string, double> human_eval_aggregate(const std::vector<Judgement>& judgements) {
  if (judgements.empty()) throw DataError("no judgements");
  std::set<std::string> raters;
  std::map<std::string, std::set<std::string>> questions;  // criterion -> questions
  std::map<std::tuple<std::string, std::string, std::string>, bool> cells;
  for (const auto& j : judgements) {
    raters.insert(j.rater);
    questions[j.criterion].insert(j.question);
    if (!cells.emplace(std::make_tuple(j.rater, j.question, j.criterion), j.yes).second) {
      throw DataError("duplicate judgement: rater " + j.rater + ", question " + j.question +
                      ", criterion " + j.criterion);
    }
  }
  std::vector<std::string> missing;
  for (const auto& [criterion, qs] : questions) {
    for (const auto& rater : raters) {
      for (const auto& q : qs) {
        if (!cells.count({rater, q, criterion})) {
          missing.push_back("(" + rater + ", " + q + ", " + criterion + ")");
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing judgements:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  std::map<std::string, double> result;
  for (const auto& [criterion, qs] : questions) {
    double sum_pct = 0.0;
    for (const auto& rater : raters) {
      std::size_t yes = 0;
      for (const auto& q : qs) yes += cells.at({rater, q, criterion}) ? 1 : 0;
      sum_pct += 100.0 * static_cast<double>(yes) / static_cast<double>(qs.size());
    }
    result[criterion] = sum_pct / static_cast<double>(raters.size());
  }
  return result;
}

MetricReport evaluate(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                      BleuOptions bleu_options, MeteorOptions meteor_options) {
  MetricReport report;
  bleu_options.max_n = 4;
  const auto b = bleu(candidates, references, bleu_options);
  report.bleu = b.scores;
  report.meteor = meteor_corpus(candidates, references, meteor_options);
  report.rouge_l = rouge_l_corpus(candidates, references);
  report.sentences = candidates.size();
  report.candidate_tokens = b.candidate_length;
  for (const auto& r : references) report.reference_tokens += r.size();
  report.bleu_smoothing = bleu_options.smoothing;
  report.meteor_variant = meteor_options.stemming ? "exact+stem" : "exact";
  return report;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu_1"] = bleu.at(0);
  j["bleu_2"] = bleu.at(1);
  j["bleu_3"] = bleu.at(2);
  j["bleu_4"] = bleu.at(3);
  j["meteor"] = meteor;
  j["rouge_l"] = rouge_l;
  j["counts"] = {{"sentences", sentences},
                 {"candidate_tokens", candidate_tokens},
                 {"reference_tokens", reference_tokens}};
  j["config"] = {{"bleu_smoothing", bleu_smoothing},
                 {"meteor_variant", meteor_variant},
                 {"rouge_beta", 1.2}};
  return j.dump(2);
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  for (std::size_t n = 0; n < bleu.size(); ++n) out << "BLEU-" << n + 1 << "   " << bleu[n] << "\n";
  out << "METEOR   " << meteor << "  (" << meteor_variant << " matching)\n";
  out << "ROUGE-L  " << rouge_l << "\n";
  out << "sentences " << sentences << ", candidate tokens " << candidate_tokens
      << ", reference tokens " << reference_tokens << "\n";
  return out.str();
}

}  // namespace qapg::metrics
