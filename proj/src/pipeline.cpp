#include "qapg/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "qapg/errors.hpp"
#include "qapg/features.hpp"

namespace qapg::pipeline {

namespace fs = std::filesystem;
using config::AnswerSource;
using corpus::Example;
using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

bool uses_answer(const ExperimentConfig& cfg) { return cfg.info().answer != AnswerSource::None; }

std::vector<Example> load_examples(const std::string& path, const char* what) {
  if (path.empty()) throw config::ConfigError(std::string("config key 'data.") + what + "' is empty");
  return corpus::read_corpus(path).examples;
}

train::FitOptions fit_options(const ExperimentConfig& cfg, diff::Rng& root) {
  train::FitOptions o;
  o.epochs = cfg.epochs;
  o.batch_size = cfg.batch_size;
  o.lr = cfg.lr_schedule();
  o.clip_norm = cfg.clip_norm;
  o.seed = root();
  o.stop_at_train_ppl = cfg.stop_at_train_ppl;
  return o;
}

}  // namespace

// ---- model construction -------------------------------------------------------

tasks::QgEncoding qg_encoding(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs) {
  tasks::QgEncoding enc;
  enc.spec = model::FeatureSpec::from_vocabularies(cfg.word_dim, vocabs, cfg.info().features, true);
  enc.force_outside = !uses_answer(cfg);
  enc.max_source = cfg.max_source_length;
  enc.max_question = cfg.max_question_length;
  return enc;
}

model::FeatureSpec answer_spec(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs) {
  return model::FeatureSpec::from_vocabularies(cfg.word_dim, vocabs, true, false);
}

model::QgModel<float> make_qg(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs) {
  model::QgDims d;
  d.input = qg_encoding(cfg, vocabs).spec;
  d.vocab_size = vocabs.words.size();
  d.hidden = cfg.hidden_size;
  d.encoder_layers = cfg.encoder_layers;
  d.decoder_layers = cfg.decoder_layers;
  d.dropout = cfg.dropout;
  return model::QgModel<float>(d);
}

answer::PointerNet<float> make_pointer(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs) {
  answer::PointerDims d;
  d.input = answer_spec(cfg, vocabs);
  d.vocab_size = vocabs.words.size();
  d.hidden = cfg.pointer_hidden;
  d.decoder_hidden = cfg.pointer_hidden;
  d.attention = cfg.pointer_attention;
  return answer::PointerNet<float>(d);
}

answer::NeSelector<float> make_ne(const ExperimentConfig& cfg, const corpus::CorpusVocabularies& vocabs) {
  answer::NeDims d;
  d.input = answer_spec(cfg, vocabs);
  d.vocab_size = vocabs.words.size();
  d.hidden = cfg.ne_hidden;
  d.layers = cfg.ne_layers;
  d.mlp_hidden = cfg.ne_mlp_hidden;
  return answer::NeSelector<float>(d);
}

// ---- prepare ------------------------------------------------------------------

std::string PrepareReport::to_json() const {
  json j;
  j["records"] = records;
  j["written"] = written;
  j["skipped"] = {{"offset_outside_context", skipped.offset_outside_context},
                  {"answer_crosses_sentence", skipped.answer_crosses_sentence},
                  {"no_answer", skipped.no_answer}};
  j["split"] = {{"train", train}, {"valid", valid}, {"test", test}};
  j["failure_rate"] = failure_rate;
  j["errors"] = errors;
  return j.dump(2) + "\n";
}

Split split_examples(std::vector<Example> examples, std::uint64_t seed, double valid_fraction,
                     double test_fraction) {
  if (valid_fraction < 0 || test_fraction < 0 || valid_fraction + test_fraction >= 1.0) {
    throw ContractViolation("split fractions must be non-negative and leave a training share");
  }
  diff::Rng rng(seed);
  for (std::size_t i = examples.size(); i > 1; --i) std::swap(examples[i - 1], examples[rng() % i]);
  const auto n = examples.size();
  const auto nv = static_cast<std::size_t>(std::llround(static_cast<double>(n) * valid_fraction));
  const auto nt = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  Split s;
  const auto train_end = n - nv - nt;
  s.train.assign(examples.begin(), examples.begin() + static_cast<std::ptrdiff_t>(train_end));
  s.valid.assign(examples.begin() + static_cast<std::ptrdiff_t>(train_end),
                 examples.begin() + static_cast<std::ptrdiff_t>(train_end + nv));
  s.test.assign(examples.begin() + static_cast<std::ptrdiff_t>(train_end + nv), examples.end());
  return s;
}

PrepareReport cmd_prepare(const PrepareOptions& options) {
  const auto squad = corpus::parse_squad(read_file(options.squad_path));
  PrepareReport report;
  report.records = squad.records.size();
  report.skipped = squad.skipped;

  // Annotation lines keyed by their token sequence.
  std::unordered_map<std::string, std::vector<corpus::TaggedToken>> annotated;
  std::size_t annotation_failures = 0;
  {
    std::ifstream in(options.annotations_path);
    if (!in) throw DataError("cannot open annotations: " + options.annotations_path);
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
      if (line.empty() || line.front() == '#') continue;
      try {
        auto tokens = line.find('\t') == std::string::npos ? corpus::parse_tagged_line(line, number)
                                                           : corpus::parse_corpus_line(line, number).sentence;
        for (auto& t : tokens) t.bio = corpus::Bio::O;
        std::vector<std::string> words;
        for (const auto& t : tokens) words.push_back(t.word);
        annotated.emplace(join(words), std::move(tokens));
      } catch (const DataError& e) {
        report.errors.push_back(options.annotations_path + ": " + e.what());
        ++annotation_failures;
      }
    }
  }

  std::vector<Example> examples;
  for (const auto& rec : squad.records) {
    const auto words = corpus::tokenize(rec.sentence);
    const auto it = annotated.find(join(words));
    if (it == annotated.end()) {
      report.errors.push_back("record " + rec.id + ": no annotation line matches the tokenized sentence '" +
                              join(words) + "'");
      continue;
    }
    const auto answer = corpus::tokenize(rec.answer);
    // Prefer the occurrence at the recorded character offset.
    std::optional<corpus::AnswerSpan> span;
    const auto before = corpus::tokenize(std::string_view(rec.sentence).substr(0, rec.answer_offset)).size();
    if (!answer.empty() && before + answer.size() <= words.size() &&
        std::equal(answer.begin(), answer.end(), words.begin() + static_cast<std::ptrdiff_t>(before))) {
      span = corpus::AnswerSpan{before + 1, before + answer.size()};
    } else {
      span = corpus::locate_answer(words, answer);
    }
    if (!span) {
      report.errors.push_back("record " + rec.id + ": answer '" + rec.answer + "' not found in the sentence tokens");
      continue;
    }
    Example ex;
    ex.sentence = it->second;
    corpus::apply_bio(ex.sentence, span);
    ex.question = corpus::tokenize(rec.question);
    ex.answer = span;
    ex.source_id = rec.id;
    examples.push_back(std::move(ex));
  }

  const auto failures = report.errors.size();
  const auto denominator = std::max<std::size_t>(1, report.records + annotation_failures);
  report.failure_rate = static_cast<double>(failures) / static_cast<double>(denominator);
  report.written = examples.size();

  fs::create_directories(options.out_dir);
  const fs::path out(options.out_dir);
  auto split = split_examples(std::move(examples), options.seed, options.valid_fraction, options.test_fraction);
  report.train = split.train.size();
  report.valid = split.valid.size();
  report.test = split.test.size();
  for (const auto& e : report.errors) spdlog::warn("prepare: {}", e);
  if (report.failure_rate > 0.01) {
    write_file(out / "prepare_report.json", report.to_json());
    throw DataError(std::to_string(failures) + " of " + std::to_string(denominator) +
                    " lines failed to align (more than 1%); see " + (out / "prepare_report.json").string());
  }
  corpus::write_corpus((out / "train.tsv").string(), split.train);
  corpus::write_corpus((out / "valid.tsv").string(), split.valid);
  corpus::write_corpus((out / "test.tsv").string(), split.test);
  const auto vocabs = corpus::build_corpus_vocabularies(split.train, options.max_vocab);
  vocabs.words.save((out / "vocab.words.txt").string());
  vocabs.pos.save((out / "vocab.pos.txt").string());
  vocabs.ner.save((out / "vocab.ner.txt").string());
  vocabs.dep.save((out / "vocab.dep.txt").string());
  write_file(out / "prepare_report.json", report.to_json());
  spdlog::info("prepare: {} records, {} written ({} / {} / {}), {} alignment errors", report.records,
               report.written, report.train, report.valid, report.test, failures);
  return report;
}

// ---- train --------------------------------------------------------------------

std::string TrainSummary::to_json() const {
  json j;
  j["model"] = checkpoint::to_string(kind);
  j["train_examples"] = train_examples;
  j["valid_examples"] = valid_examples;
  j["epochs_run"] = fit.log.size();
  j["best_epoch"] = fit.best_epoch;
  j["stopped_early"] = fit.stopped_early;
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["metrics"] = m;
  return j.dump(2) + "\n";
}

void validate_training_data(const ExperimentConfig& cfg, ModelKind kind, const std::vector<Example>& train) {
  if (train.empty()) throw DataError("training corpus " + cfg.train_path + " is empty");
  std::size_t without_answer = 0, without_question = 0, with_entities = 0;
  for (const auto& ex : train) {
    without_answer += !ex.answer.has_value();
    without_question += ex.question.empty();
    for (const auto& t : ex.sentence) {
      if (t.ner != "O") {
        ++with_entities;
        break;
      }
    }
  }
  const bool needs_answer = kind != ModelKind::Qg || uses_answer(cfg);
  if (needs_answer && without_answer == train.size()) {
    throw config::ConfigError(std::string(kind == ModelKind::Qg ? "variant " : "model ") +
                              (kind == ModelKind::Qg ? config::to_string(cfg.variant) : checkpoint::to_string(kind)) +
                              " needs an answer column but no line of " + cfg.train_path + " has one");
  }
  if (kind == ModelKind::Qg && without_question == train.size()) {
    throw config::ConfigError("question generation needs questions but no line of " + cfg.train_path + " has one");
  }
  if (kind == ModelKind::NeSelector && with_entities == 0) {
    throw config::ConfigError("the NE selector needs NER tags but " + cfg.train_path + " has no entity");
  }
  if (kind == ModelKind::Qg && cfg.info().features) {
    bool any_tag = false;
    for (const auto& ex : train) {
      for (const auto& t : ex.sentence) any_tag = any_tag || !t.pos.empty() || !t.dep.empty();
    }
    if (!any_tag) {
      throw config::ConfigError(std::string("variant ") + config::to_string(cfg.variant) +
                                " uses feature channels but the corpus has no POS/DEP tags");
    }
  }
}

TrainSummary cmd_train(const ExperimentConfig& cfg, ModelKind kind, const std::string& out_path,
                       const std::string& run_dir) {
  cfg.validate();
  const auto train_ex = load_examples(cfg.train_path, "train");
  const auto valid_ex = cfg.valid_path.empty() ? std::vector<Example>{} : corpus::read_corpus(cfg.valid_path).examples;
  validate_training_data(cfg, kind, train_ex);

  checkpoint::Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.config = cfg;
  ckpt.vocabs = corpus::build_corpus_vocabularies(train_ex, cfg.max_vocab);

  std::ofstream epochs;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    write_file(fs::path(run_dir) / "config.ini", cfg.canonical_text());
    epochs.open(fs::path(run_dir) / "epochs.jsonl", std::ios::binary);
  }
  auto on_epoch = [&](const train::EpochLog& e) {
    spdlog::info("{} epoch {:>3}  lr {:.3g}  train ppl {:.4f}{}  |g| {:.3f}", checkpoint::to_string(kind), e.epoch,
                 e.lr, e.train_ppl, e.valid_score ? fmt::format("  valid {:.4f}", *e.valid_score) : std::string(),
                 e.grad_norm);
    if (epochs.is_open()) {
      json j;
      j["epoch"] = e.epoch;
      j["lr"] = e.lr;
      j["train_loss"] = e.train_loss;
      j["train_ppl"] = e.train_ppl;
      j["valid"] = e.valid_score ? json(*e.valid_score) : json(nullptr);
      j["grad_norm"] = e.grad_norm;
      j["tokens"] = e.tokens;
      epochs << j.dump() << '\n';
      epochs.flush();
    }
  };

  diff::Rng root(cfg.seed);
  TrainSummary summary;
  summary.kind = kind;
  const auto fit = fit_options(cfg, root);
  if (kind == ModelKind::Qg) {
    const auto enc = qg_encoding(cfg, ckpt.vocabs);
    tasks::EncodeReport rep;
    const auto train_data = tasks::encode_qg(train_ex, enc, ckpt.vocabs, &rep);
    const auto valid_data = tasks::encode_qg(valid_ex, enc, ckpt.vocabs);
    if (rep.unknown_tags.total() > 0) spdlog::warn("train: {} unknown feature tags", rep.unknown_tags.total());
    auto model = make_qg(cfg, ckpt.vocabs);
    model.params().init_uniform(root, -cfg.init_range, cfg.init_range);
    if (!cfg.embeddings_path.empty()) {
      for (const char* name : {"encoder.embed", "decoder.embed"}) {
        const auto n = model::load_pretrained_embeddings(cfg.embeddings_path, ckpt.vocabs.words,
                                                         model.params().at(name));
        spdlog::info("train: {} pretrained rows loaded into {}", n, name);
      }
    }
    summary.train_examples = train_data.size();
    summary.valid_examples = valid_data.size();
    summary.fit = tasks::train_qg(model, train_data, valid_data.size() ? &valid_data : nullptr, fit, on_epoch);
    summary.metrics["train_perplexity"] = tasks::perplexity(model, train_data);
    if (valid_data.size()) summary.metrics["valid_perplexity"] = tasks::perplexity(model, valid_data);
    checkpoint::store_params(ckpt, model.params());
  } else if (kind == ModelKind::NeSelector) {
    const auto spec = answer_spec(cfg, ckpt.vocabs);
    tasks::EncodeReport rep;
    const auto train_data = tasks::encode_ne(train_ex, spec, ckpt.vocabs, &rep);
    const auto valid_data = tasks::encode_ne(valid_ex, spec, ckpt.vocabs);
    if (train_data.size() == 0) throw DataError("no training example has its answer among the entity candidates");
    if (rep.dropped_without_candidate) {
      spdlog::info("train: {} examples whose answer is not an entity run were skipped", rep.dropped_without_candidate);
    }
    auto ne = make_ne(cfg, ckpt.vocabs);
    ne.params().init_uniform(root, -cfg.init_range, cfg.init_range);
    summary.train_examples = train_data.size();
    summary.valid_examples = valid_data.size();
    summary.fit = tasks::train_ne(ne, train_data, valid_data.size() ? &valid_data : nullptr, fit, on_epoch);
    summary.metrics["train_accuracy"] = tasks::ne_accuracy(ne, train_data);
    if (valid_data.size()) summary.metrics["valid_accuracy"] = tasks::ne_accuracy(ne, valid_data);
    checkpoint::store_params(ckpt, ne.params());
  } else {
    const auto mode =
        kind == ModelKind::BoundaryPointer ? answer::PointerMode::Boundary : answer::PointerMode::Sequence;
    const auto spec = answer_spec(cfg, ckpt.vocabs);
    const auto train_data = tasks::encode_spans(train_ex, spec, ckpt.vocabs);
    const auto valid_data = tasks::encode_spans(valid_ex, spec, ckpt.vocabs);
    auto net = make_pointer(cfg, ckpt.vocabs);
    net.params().init_uniform(root, -cfg.init_range, cfg.init_range);
    summary.train_examples = train_data.size();
    summary.valid_examples = valid_data.size();
    summary.fit = tasks::train_pointer(net, mode, train_data, valid_data.size() ? &valid_data : nullptr, fit, on_epoch);
    const auto tr = tasks::score_pointer(net, train_data, mode);
    summary.metrics["train_exact"] = tr.exact_rate();
    summary.metrics["train_contiguous"] = tr.contiguous_rate();
    if (valid_data.size()) {
      const auto va = tasks::score_pointer(net, valid_data, mode);
      summary.metrics["valid_exact"] = va.exact_rate();
      summary.metrics["valid_contiguous"] = va.contiguous_rate();
    }
    checkpoint::store_params(ckpt, net.params());
  }

  checkpoint::save(out_path, ckpt);
  if (!run_dir.empty()) write_file(fs::path(run_dir) / "summary.json", summary.to_json());
  spdlog::info("train: wrote {} (fingerprint {})", out_path, config::fingerprint_hex(ckpt.fingerprint()));
  return summary;
}

// ---- select-answer ------------------------------------------------------------

std::vector<std::optional<corpus::AnswerSpan>> select_answers(const checkpoint::Checkpoint& ckpt,
                                                              const std::vector<Example>& examples,
                                                              const checkpoint::Checkpoint* fallback,
                                                              SelectReport* report) {
  SelectReport local;
  std::vector<std::optional<corpus::AnswerSpan>> out;
  out.reserve(examples.size());
  const auto spec = answer_spec(ckpt.config, ckpt.vocabs);

  std::optional<answer::PointerNet<float>> pointer;
  std::optional<answer::NeSelector<float>> ne;
  std::optional<answer::PointerNet<float>> backup;
  std::optional<model::FeatureSpec> backup_spec;
  switch (ckpt.kind) {
    case ModelKind::Qg: throw DataError("select-answer needs an answer-selection checkpoint, got a qg checkpoint");
    case ModelKind::NeSelector:
      ne.emplace(make_ne(ckpt.config, ckpt.vocabs));
      checkpoint::load_params(ckpt, ne->params());
      break;
    default:
      pointer.emplace(make_pointer(ckpt.config, ckpt.vocabs));
      checkpoint::load_params(ckpt, pointer->params());
  }
  if (fallback) {
    if (fallback->kind != ModelKind::BoundaryPointer && fallback->kind != ModelKind::SequencePointer) {
      throw DataError("the fallback checkpoint must be a pointer network");
    }
    backup.emplace(make_pointer(fallback->config, fallback->vocabs));
    checkpoint::load_params(*fallback, backup->params());
    backup_spec = answer_spec(fallback->config, fallback->vocabs);
  }

  auto run_pointer = [](const answer::PointerNet<float>& net, const model::SourceInput& src, ModelKind kind,
                        std::size_t cap) -> std::optional<corpus::AnswerSpan> {
    answer::NetworkScorer<float> scorer(net, src);
    if (kind == ModelKind::BoundaryPointer) return answer::boundary_pointer_decode(scorer);
    return answer::sequence_to_span(answer::sequence_pointer_decode(scorer, cap));
  };

  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    ++local.sentences;
    std::optional<corpus::AnswerSpan> span;
    const auto src = model::encode_source(ex.sentence, spec, ckpt.vocabs);
    if (ne) {
      const auto cands = answer::candidate_entities(ex.sentence);
      if (!cands.empty()) {
        span = cands[answer::argmax_lowest(ne->probabilities(src, cands))];
      } else if (backup) {
        ++local.fallback;
        spdlog::info("select-answer: line {} has no entity, using the {} pointer", i + 1,
                     checkpoint::to_string(fallback->kind));
        span = run_pointer(*backup, model::encode_source(ex.sentence, *backup_spec, fallback->vocabs), fallback->kind,
                           fallback->config.pointer_step_cap);
      } else {
        spdlog::warn("select-answer: line {} has no entity and no fallback checkpoint was given", i + 1);
      }
    } else {
      span = run_pointer(*pointer, src, ckpt.kind, ckpt.config.pointer_step_cap);
    }
    if (span) {
      ++local.selected;
    } else {
      ++local.empty;
    }
    out.push_back(span);
  }
  if (report) *report = local;
  return out;
}

SelectReport cmd_select_answer(const std::string& checkpoint_path, const std::string& in_path,
                               const std::string& out_path, const std::string& fallback_path) {
  const auto ckpt = checkpoint::load(checkpoint_path);
  std::optional<checkpoint::Checkpoint> fallback;
  if (!fallback_path.empty()) fallback = checkpoint::load(fallback_path);
  auto examples = corpus::read_corpus(in_path).examples;
  SelectReport report;
  const auto spans = select_answers(ckpt, examples, fallback ? &*fallback : nullptr, &report);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    examples[i].answer = spans[i];
    corpus::apply_bio(examples[i].sentence, spans[i]);
  }
  corpus::write_corpus(out_path, examples);
  spdlog::info("select-answer: {} sentences, {} spans, {} via fallback, {} empty", report.sentences, report.selected,
               report.fallback, report.empty);
  return report;
}

// ---- generate -----------------------------------------------------------------

std::vector<GeneratedQuestion> generate_questions(const checkpoint::Checkpoint& ckpt,
                                                  const std::vector<Example>& examples,
                                                  model::GenerateOptions options) {
  if (ckpt.kind != ModelKind::Qg) {
    throw DataError(std::string("generate needs a qg checkpoint, got ") + checkpoint::to_string(ckpt.kind));
  }
  auto model = make_qg(ckpt.config, ckpt.vocabs);
  checkpoint::load_params(ckpt, model.params());
  const auto enc = qg_encoding(ckpt.config, ckpt.vocabs);
  std::vector<GeneratedQuestion> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto src = tasks::encode_sentence(ex.sentence, enc, ckpt.vocabs);
    const auto g = model::generate(model, src, options);
    out.push_back({model::strip_specials(g.ids, ckpt.vocabs.words), g.log_prob, g.avg_log_prob});
  }
  return out;
}

std::vector<GeneratedQuestion> cmd_generate(const std::string& checkpoint_path, const std::string& in_path,
                                            const std::string& out_path, std::size_t beam) {
  const auto ckpt = checkpoint::load(checkpoint_path);
  const auto examples = corpus::read_corpus(in_path).examples;
  model::GenerateOptions options;
  options.beam = beam ? beam : ckpt.config.beam;
  options.max_length = ckpt.config.max_output_length;
  const auto questions = generate_questions(ckpt, examples, options);
  std::ofstream text(out_path, std::ios::binary);
  std::ofstream side(out_path + ".jsonl", std::ios::binary);
  if (!text || !side) throw DataError("cannot write " + out_path);
  for (std::size_t i = 0; i < questions.size(); ++i) {
    text << join(questions[i].tokens) << '\n';
    json j;
    j["line"] = i + 1;
    j["question"] = join(questions[i].tokens);
    j["answer"] = corpus::format_span(examples[i].answer);
    j["beam"] = options.beam;
    j["log_prob"] = questions[i].log_prob;
    j["avg_log_prob"] = questions[i].avg_log_prob;
    side << j.dump() << '\n';
  }
  spdlog::info("generate: {} questions (beam {}) -> {}", questions.size(), options.beam, out_path);
  return questions;
}

// ---- evaluate -----------------------------------------------------------------

std::vector<metrics::Sentence> read_questions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<metrics::Sentence> out;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    if (line.find('\t') != std::string::npos) {
      out.push_back(corpus::parse_corpus_line(line, number).question);
      continue;
    }
    std::istringstream ss(line);
    metrics::Sentence s;
    for (std::string w; ss >> w;) s.push_back(w);
    out.push_back(std::move(s));
  }
  return out;
}

metrics::MetricReport cmd_evaluate(const std::string& candidates_path, const std::string& references_path,
                                   const EvaluateOptions& options) {
  const auto cands = read_questions(candidates_path);
  const auto refs = read_questions(references_path);
  if (cands.size() != refs.size()) {
    throw DataError(candidates_path + " has " + std::to_string(cands.size()) + " lines but " + references_path +
                    " has " + std::to_string(refs.size()));
  }
  return metrics::evaluate(cands, refs, options.bleu, options.meteor);
}

std::map<std::string, double> cmd_human(const std::string& judgements_path) {
  return metrics::human_eval_aggregate(metrics::parse_judgements(read_file(judgements_path)));
}

// ---- gradcheck ----------------------------------------------------------------

std::string format_grad_table(const std::vector<diff::GradSuiteRow>& rows, double tolerance) {
  std::ostringstream out;
  out << std::left << std::setw(26) << "op" << std::right << std::setw(14) << "max rel err" << std::setw(10)
      << "entries" << "  result\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(26) << r.name << std::right << std::setw(14) << std::scientific
        << std::setprecision(3) << r.max_rel_error << std::setw(10) << r.entries << "  "
        << (r.passed ? "PASS" : "FAIL") << '\n';
  }
  std::size_t failed = 0;
  for (const auto& r : rows) failed += !r.passed;
  out << std::defaultfloat << rows.size() << " cases, " << failed << " failed (tolerance " << tolerance << ")\n";
  return out.str();
}

}  // namespace qapg::pipeline
