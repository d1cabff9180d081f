// Acceptance run: one PASS/FAIL line per criterion. Thresholds, sizes and
// time limits are fixed here and are not configurable.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "qapg/checkpoint.hpp"
#include "qapg/config.hpp"
#include "qapg/corpus.hpp"
#include "qapg/errors.hpp"
#include "qapg/gradsuite.hpp"
#include "qapg/metrics.hpp"
#include "qapg/pipeline.hpp"
#include "qapg/synthetic.hpp"
#include "qapg/tasks.hpp"
#include "support/fuzz.hpp"
#include "support/oracles.hpp"

using namespace qapg;
namespace fs = std::filesystem;

namespace {

const std::string kSource = QAPG_SOURCE_DIR;
const std::string kFixtures = kSource + "/tests/fixtures";

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt_double(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("qapg_accept_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

config::ExperimentConfig desk() { return config::load_config(kSource + "/configs/desk.ini"); }

// ---- gradient suite -----------------------------------------------------------

constexpr std::size_t kGradSeeds = 10;
constexpr double kGradTolerance = 1e-4;

Outcome gradient_suite() {
  const auto rows = diff::run_grad_suite(kGradSeeds, kGradTolerance);
  Outcome o{true, ""};
  double worst = 0.0;
  std::string worst_name;
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.passed) ++failed;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  o.pass = failed == 0 && !rows.empty();
  o.detail = std::to_string(rows.size()) + " cases x " + std::to_string(kGradSeeds) + " seeds, " +
             std::to_string(failed) + " failed, worst " + worst_name + " " + sci(worst);
  return o;
}

// ---- overfit ------------------------------------------------------------------

constexpr std::size_t kOverfitMaxEpochs = 300;
constexpr double kOverfitPerplexity = 1.2;
constexpr double kOverfitReproduction = 0.90;

Outcome overfit() {
  TempDir dir("overfit");
  auto cfg = desk();
  cfg.train_path = kFixtures + "/toy32.tsv";
  cfg.valid_path.clear();
  cfg.test_path.clear();
  if (cfg.epochs > kOverfitMaxEpochs) return {false, "desk config trains for more than 300 epochs"};
  const auto summary = pipeline::cmd_train(cfg, checkpoint::ModelKind::Qg, dir / "toy.ckpt");
  const double ppl = summary.metrics.at("train_perplexity");

  const auto ckpt = checkpoint::load(dir / "toy.ckpt");
  const auto examples = corpus::read_corpus(cfg.train_path).examples;
  model::GenerateOptions greedy;
  greedy.beam = 1;
  greedy.max_length = cfg.max_output_length;
  const auto out = pipeline::generate_questions(ckpt, examples, greedy);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) exact += out[i].tokens == examples[i].question;
  const double rate = static_cast<double>(exact) / static_cast<double>(examples.size());
  return {examples.size() == 32 && ppl < kOverfitPerplexity && rate >= kOverfitReproduction &&
              summary.fit.log.size() <= kOverfitMaxEpochs,
          "train ppl " + fmt_double(ppl) + " after " + std::to_string(summary.fit.log.size()) +
              " epochs, greedy exact " + std::to_string(exact) + "/" + std::to_string(examples.size())};
}

// ---- sentinel span pointers ---------------------------------------------------

constexpr std::size_t kSentinelTrain = 5000;
constexpr std::size_t kSentinelTest = 1000;
constexpr double kBoundaryExact = 0.95;
constexpr double kSequenceContiguous = 0.90;
constexpr std::size_t kPointerEpochs = 4;
constexpr double kPointerLr = 0.005;

train::FitOptions pointer_fit(std::uint64_t seed) {
  train::FitOptions o;
  o.epochs = kPointerEpochs;
  o.batch_size = 16;
  o.lr.base = kPointerLr;
  o.lr.start_epoch = 1000;
  o.seed = seed;
  return o;
}

Outcome sentinel_pointers() {
  // One generator call, then a split, so both halves share filler words.
  auto all = synthetic::sentinel_span_task(kSentinelTrain + kSentinelTest, 101);
  const std::vector<corpus::Example> train_ex(all.begin(), all.begin() + kSentinelTrain);
  const std::vector<corpus::Example> test_ex(all.begin() + kSentinelTrain, all.end());
  const auto cfg = desk();
  const auto vocabs = corpus::build_corpus_vocabularies(train_ex, 0);
  const auto spec = pipeline::answer_spec(cfg, vocabs);
  const auto train_data = tasks::encode_spans(train_ex, spec, vocabs);
  const auto test_data = tasks::encode_spans(test_ex, spec, vocabs);
  if (train_data.size() != kSentinelTrain || test_data.size() != kSentinelTest) return {false, "task size mismatch"};

  auto run = [&](answer::PointerMode mode) {
    auto net = pipeline::make_pointer(cfg, vocabs);
    diff::Rng rng(cfg.seed);
    net.params().init_uniform(rng, -cfg.init_range, cfg.init_range);
    tasks::train_pointer(net, mode, train_data, nullptr, pointer_fit(cfg.seed));
    return tasks::score_pointer(net, test_data, mode);
  };
  const auto b = run(answer::PointerMode::Boundary);
  const auto s = run(answer::PointerMode::Sequence);
  return {b.exact_rate() >= kBoundaryExact && s.contiguous_rate() >= kSequenceContiguous,
          "boundary exact " + fmt_double(b.exact_rate()) + ", sequence contiguous " +
              fmt_double(s.contiguous_rate()) + " (sequence exact " + fmt_double(s.exact_rate()) + ") on " +
              std::to_string(kSentinelTest) + " test sentences"};
}

// ---- NE selection -------------------------------------------------------------

constexpr std::size_t kNeTrain = 2000;
constexpr std::size_t kNeTest = 500;
constexpr double kNeAccuracy = 0.95;
constexpr double kProbabilitySum = 1e-6;
constexpr std::size_t kNeEpochs = 4;

Outcome ne_selection() {
  auto all = synthetic::first_person_task(kNeTrain + kNeTest, 202);
  const std::vector<corpus::Example> train_ex(all.begin(), all.begin() + kNeTrain);
  const std::vector<corpus::Example> test_ex(all.begin() + kNeTrain, all.end());
  const auto cfg = desk();
  const auto vocabs = corpus::build_corpus_vocabularies(train_ex, 0);
  const auto spec = pipeline::answer_spec(cfg, vocabs);
  const auto train_data = tasks::encode_ne(train_ex, spec, vocabs);
  const auto test_data = tasks::encode_ne(test_ex, spec, vocabs);

  auto ne = pipeline::make_ne(cfg, vocabs);
  diff::Rng rng(cfg.seed);
  ne.params().init_uniform(rng, -cfg.init_range, cfg.init_range);
  auto fit = pointer_fit(cfg.seed);
  fit.epochs = kNeEpochs;
  tasks::train_ne(ne, train_data, nullptr, fit);
  const double acc = tasks::ne_accuracy(ne, test_data);

  double worst = 0.0;
  for (std::size_t i = 0; i < test_data.size(); ++i) {
    const auto p = ne.probabilities(test_data.sources[i], test_data.candidates[i]);
    double sum = 0.0;
    for (double v : p) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {test_data.size() == kNeTest && acc >= kNeAccuracy && worst <= kProbabilitySum,
          "test accuracy " + fmt_double(acc) + " on " + std::to_string(test_data.size()) +
              ", max |sum p - 1| " + sci(worst)};
}

// ---- metric oracles -----------------------------------------------------------

constexpr double kMetricTolerance = 1e-6;
constexpr std::size_t kRougePairs = 1000;
constexpr std::size_t kMeteorPairs = 2000;

Outcome metric_oracles() {
  using metrics::Sentence;
  std::vector<std::string> failures;
  const Sentence cat = {"the", "cat", "sat", "on", "the", "mat"};
  const auto same = metrics::bleu({cat}, std::vector<Sentence>{cat});
  for (double v : same.scores) {
    if (std::abs(v - 100.0) > kMetricTolerance) failures.push_back("identical BLEU " + fmt_double(v, 8));
  }
  const auto the = metrics::bleu({{"the", "the", "the", "the"}}, std::vector<Sentence>{{"the", "cat"}});
  if (std::abs(the.scores[0] - 25.0) > kMetricTolerance) failures.push_back("BLEU-1 " + fmt_double(the.scores[0], 8));

  std::mt19937_64 rng(7);
  std::size_t rouge_bad = 0;
  for (std::size_t i = 0; i < kRougePairs; ++i) {
    const auto a = testing::random_words(rng, 20, 5);
    const auto b = testing::random_words(rng, 20, 5);
    if (metrics::lcs_length(a, b) != testing::lcs_oracle(a, b) ||
        metrics::rouge_l(a, b) != testing::rouge_l_oracle(a, b)) {
      ++rouge_bad;
    }
  }
  if (rouge_bad) failures.push_back(std::to_string(rouge_bad) + " ROUGE-L mismatches");

  std::size_t meteor_bad = 0;
  for (std::size_t i = 0; i < kMeteorPairs; ++i) {
    const auto a = testing::random_words(rng, 8, 4);
    const auto b = testing::random_words(rng, 8, 4);
    const auto al = metrics::meteor_align(a, b);
    const auto oracle = testing::meteor_alignment_oracle(a, b);
    if (al.matches != oracle.matches || al.chunks != oracle.chunks ||
        std::abs(metrics::meteor_lite(a, b) - testing::meteor_oracle(a, b)) > kMetricTolerance) {
      ++meteor_bad;
    }
  }
  if (meteor_bad) failures.push_back(std::to_string(meteor_bad) + " METEOR mismatches");

  // Three raters answering yes on 80, 79 and 73 of 100 questions.
  std::vector<metrics::Judgement> table;
  const int totals[] = {80, 79, 73};
  for (int r = 0; r < 3; ++r) {
    for (int q = 0; q < 100; ++q) {
      table.push_back({"r" + std::to_string(r), "q" + std::to_string(q), "relevance", q < totals[r]});
    }
  }
  const double human = metrics::human_eval_aggregate(table).at("relevance");
  if (std::abs(human - 77.33) > 0.005) failures.push_back("human aggregate " + fmt_double(human));

  std::string detail = "BLEU " + fmt_double(same.scores[3], 2) + "/" + fmt_double(the.scores[0], 2) + ", " +
                       std::to_string(kRougePairs) + " ROUGE-L and " + std::to_string(kMeteorPairs) +
                       " METEOR oracle pairs, human " + fmt_double(human, 2);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---- format and persistence laws ------------------------------------------------

constexpr std::size_t kFuzzCases = 10000;

Outcome persistence_laws() {
  std::vector<std::string> failures;
  std::mt19937_64 rng(23);
  std::size_t tagged_bad = 0, bio_bad = 0;
  for (std::size_t i = 0; i < kFuzzCases; ++i) {
    const auto tokens = testing::random_tagged_sentence(rng, 1 + rng() % 30);
    if (corpus::parse_tagged_line(corpus::format_tagged_line(tokens)) != tokens) ++tagged_bad;
    const std::size_t len = 1 + rng() % 50;
    const auto span = testing::random_span(rng, len);
    if (corpus::decode_bio(corpus::encode_bio(len, span)) != span) ++bio_bad;
  }
  if (tagged_bad) failures.push_back(std::to_string(tagged_bad) + " tagged-format round trip failures");
  if (bio_bad) failures.push_back(std::to_string(bio_bad) + " BIO round trip failures");

  TempDir dir("laws");
  auto run = [&] {
    pipeline::PrepareOptions prep;
    prep.squad_path = kFixtures + "/squad12.json";
    prep.annotations_path = kFixtures + "/squad12.tagged";
    prep.out_dir = dir.path.string();
    pipeline::cmd_prepare(prep);
    auto cfg = desk();
    cfg.train_path = dir / "train.tsv";
    cfg.valid_path = dir / "valid.tsv";
    cfg.test_path = dir / "test.tsv";
    cfg.epochs = 5;
    pipeline::cmd_train(cfg, checkpoint::ModelKind::BoundaryPointer, dir / "b.ckpt", dir / "brun");
    pipeline::cmd_train(cfg, checkpoint::ModelKind::Qg, dir / "qg.ckpt", dir / "qrun");
    pipeline::cmd_select_answer(dir / "b.ckpt", dir / "test.tsv", dir / "test.sel.tsv");
    pipeline::cmd_generate(dir / "qg.ckpt", dir / "test.sel.tsv", dir / "q.txt");
    std::string reports = pipeline::cmd_evaluate(dir / "q.txt", dir / "test.tsv").to_json();
    for (const char* f : {"prepare_report.json", "brun/summary.json", "brun/epochs.jsonl", "qrun/summary.json",
                          "qrun/epochs.jsonl", "b.ckpt", "qg.ckpt", "test.sel.tsv", "q.txt.jsonl"}) {
      reports += slurp(dir / f);
    }
    return reports;
  };
  if (run() != run()) failures.push_back("same-seed pipeline runs differ");

  const auto ckpt = checkpoint::load(dir / "qg.ckpt");
  checkpoint::save(dir / "again.ckpt", ckpt);
  if (slurp(dir / "again.ckpt") != slurp(dir / "qg.ckpt")) failures.push_back("checkpoint save/load/save differs");

  std::string detail = std::to_string(kFuzzCases) + " tagged and BIO round trips, checkpoint byte identity, "
                       "two seeded prepare/train/select/generate/evaluate runs";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ---- worked example -------------------------------------------------------------

Outcome worked_example() {
  const auto words = corpus::tokenize(
      "other past residents include composer journalist and newspaper editor william henry wills , "
      "ron goodwin , and journalist angela rippon and comedian dawn french");
  answer::ForcedScorer boundary(words.size(), {10, 12});
  const auto span = answer::boundary_pointer_decode(boundary);
  std::vector<std::size_t> idx;
  for (auto i = span.start; i <= span.end; ++i) idx.push_back(i);
  const auto b = answer::indices_to_tokens(words, idx);

  answer::ForcedScorer sequence(words.size(), {6, 11, 20});
  const auto s = answer::indices_to_tokens(words, answer::sequence_pointer_decode(sequence));

  auto join = [](const std::vector<std::string>& w) {
    std::string out;
    for (const auto& x : w) out += (out.empty() ? "" : " ") + x;
    return out;
  };
  return {join(b) == "william henry wills" && join(s) == "journalist henry rippon",
          "[10,12] -> \"" + join(b) + "\", [6,11,20] -> \"" + join(s) + "\""};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  app.add_option("--only", only, "run only these criterion ids");
  CLI11_PARSE(app, argc, argv);
  if (!std::getenv("QAPAIRGEN_LOG")) spdlog::set_level(spdlog::level::warn);

  const std::vector<Criterion> criteria = {
      {"gradients", "gradient suite, 10 seeds, rel err < 1e-4", 120, gradient_suite},
      {"overfit", "32-pair overfit: ppl < 1.2 in <= 300 epochs, greedy exact >= 90%", 300, overfit},
      {"sentinel", "sentinel spans 5k/1k: boundary exact >= 0.95, sequence contiguous >= 0.90", 600,
       sentinel_pointers},
      {"ne", "first-PERSON NE selection: accuracy >= 0.95, sum p = 1 +- 1e-6", 600, ne_selection},
      {"metrics", "metric oracles: BLEU hand cases, ROUGE-L/LCS, METEOR exhaustive, human 77.33", 600,
       metric_oracles},
      {"persistence", "format round trips, checkpoint identity, same-seed pipeline", 600, persistence_laws},
      {"worked-example", "stub pointer choices map to the expected answer tokens", 60, worked_example},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ": " << c.title << " | " << o.detail << " | "
              << fmt_double(secs, 1) << " s (limit " << c.time_limit_s << " s)" << (in_time ? "" : " TOO SLOW")
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
