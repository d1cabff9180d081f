// Python module: data preparation, training, answer selection, generation,
// evaluation and the gradient suite.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <tuple>

#include "qapg/answersel.hpp"
#include "qapg/checkpoint.hpp"
#include "qapg/config.hpp"
#include "qapg/corpus.hpp"
#include "qapg/errors.hpp"
#include "qapg/metrics.hpp"
#include "qapg/pipeline.hpp"

namespace py = pybind11;
using namespace qapg;

namespace {

using Token = std::tuple<std::string, std::string, std::string, std::string, std::string>;
using Span = std::optional<std::pair<std::size_t, std::size_t>>;

py::object from_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

std::optional<corpus::AnswerSpan> to_span(const Span& s) {
  if (!s) return std::nullopt;
  return corpus::AnswerSpan{s->first, s->second};
}

Span from_span(const std::optional<corpus::AnswerSpan>& s) {
  if (!s) return std::nullopt;
  return std::make_pair(s->start, s->end);
}

std::vector<Token> tokens_out(const std::vector<corpus::TaggedToken>& tokens) {
  std::vector<Token> out;
  for (const auto& t : tokens) out.emplace_back(t.word, t.pos, t.ner, t.dep, std::string(1, corpus::bio_char(t.bio)));
  return out;
}

std::vector<corpus::TaggedToken> tokens_in(const std::vector<Token>& tokens) {
  std::vector<corpus::TaggedToken> out;
  for (const auto& [w, p, n, d, b] : tokens) out.push_back({w, p, n, d, corpus::bio_from_string(b)});
  return out;
}

py::dict bleu_dict(const metrics::BleuResult& r) {
  py::dict d;
  d["scores"] = r.scores;
  d["precisions"] = r.precisions;
  d["brevity_penalty"] = r.brevity_penalty;
  d["candidate_length"] = r.candidate_length;
  d["reference_length"] = r.reference_length;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "QA pair generation: answer selection and question generation";

  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", data_error.ptr());
  py::register_exception<config::ConfigError>(m, "ConfigError", data_error.ptr());
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

  // corpus format
  m.def("tokenize", [](const std::string& text) { return corpus::tokenize(text); });
  m.def(
      "parse_tagged_line", [](const std::string& line) { return tokens_out(corpus::parse_tagged_line(line)); },
      "word|POS|NER|DEP|BIO tokens -> list of 5-tuples");
  m.def("format_tagged_line", [](const std::vector<Token>& t) { return corpus::format_tagged_line(tokens_in(t)); });
  m.def(
      "encode_bio",
      [](std::size_t length, const Span& span) {
        std::string out;
        for (auto b : corpus::encode_bio(length, to_span(span))) out += corpus::bio_char(b);
        return out;
      },
      py::arg("length"), py::arg("span") = py::none(), "1-based inclusive span -> string of B/I/O");
  m.def("decode_bio", [](const std::string& tags) {
    std::vector<corpus::Bio> bio;
    for (char c : tags) bio.push_back(corpus::bio_from_string(std::string(1, c)));
    return from_span(corpus::decode_bio(bio));
  });
  m.def("locate_answer", [](const std::vector<std::string>& sentence, const std::vector<std::string>& answer) {
    return from_span(corpus::locate_answer(sentence, answer));
  });

  // configuration
  m.def("variants", [] {
    py::list out;
    for (const auto& v : config::variant_table()) {
      py::dict d;
      d["name"] = v.name;
      d["features"] = v.features;
      d["answer"] = config::to_string(v.answer);
      out.append(d);
    }
    return out;
  });

  py::class_<config::ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("load", &config::load_config, py::arg("path"))
      .def_static("parse", &config::parse_config, py::arg("text"))
      .def(
          "set",
          [](config::ExperimentConfig& c, const std::string& key, const std::string& value) {
            config::set_value(c, key, value);
            c.validate();
          },
          py::arg("key"), py::arg("value"), "set 'section.key' from its INI text and revalidate")
      .def_property_readonly("variant", [](const config::ExperimentConfig& c) { return config::to_string(c.variant); })
      .def_readonly("seed", &config::ExperimentConfig::seed)
      .def_readonly("epochs", &config::ExperimentConfig::epochs)
      .def_readonly("beam", &config::ExperimentConfig::beam)
      .def_readonly("train_path", &config::ExperimentConfig::train_path)
      .def_property_readonly("fingerprint",
                             [](const config::ExperimentConfig& c) { return config::fingerprint_hex(c.fingerprint()); })
      .def("canonical_text", &config::ExperimentConfig::canonical_text)
      .def("__eq__", [](const config::ExperimentConfig& a, const config::ExperimentConfig& b) { return a == b; })
      .def("__repr__", [](const config::ExperimentConfig& c) {
        return std::string("<Config ") + config::to_string(c.variant) + " " + config::fingerprint_hex(c.fingerprint()) +
               ">";
      });

  // pipeline
  m.def(
      "prepare",
      [](const std::string& squad, const std::string& annotations, const std::string& out_dir, std::uint64_t seed,
         double valid_fraction, double test_fraction, std::size_t max_vocab) {
        pipeline::PrepareOptions o{squad, annotations, out_dir, seed, valid_fraction, test_fraction, max_vocab};
        std::string report;
        {
          py::gil_scoped_release release;
          report = pipeline::cmd_prepare(o).to_json();
        }
        return from_json(report);
      },
      py::arg("squad"), py::arg("annotations"), py::arg("out_dir"), py::arg("seed") = 13,
      py::arg("valid_fraction") = 1.0 / 6.0, py::arg("test_fraction") = 1.0 / 6.0, py::arg("max_vocab") = 0);

  m.def(
      "train",
      [](const config::ExperimentConfig& cfg, const std::string& model, const std::string& out,
         const std::string& run_dir) {
        std::string summary;
        {
          py::gil_scoped_release release;
          summary = pipeline::cmd_train(cfg, checkpoint::parse_model_kind(model), out, run_dir).to_json();
        }
        return from_json(summary);
      },
      py::arg("config"), py::arg("model") = "qg", py::arg("out"), py::arg("run_dir") = "");

  m.def(
      "select_answer",
      [](const std::string& ckpt, const std::string& in, const std::string& out, const std::string& fallback) {
        pipeline::SelectReport r;
        {
          py::gil_scoped_release release;
          r = pipeline::cmd_select_answer(ckpt, in, out, fallback);
        }
        py::dict d;
        d["sentences"] = r.sentences;
        d["selected"] = r.selected;
        d["fallback"] = r.fallback;
        d["empty"] = r.empty;
        return d;
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("out"), py::arg("fallback") = "");

  m.def(
      "generate",
      [](const std::string& ckpt, const std::string& in, const std::string& out, std::size_t beam) {
        std::vector<pipeline::GeneratedQuestion> qs;
        {
          py::gil_scoped_release release;
          qs = pipeline::cmd_generate(ckpt, in, out, beam);
        }
        py::list result;
        for (const auto& q : qs) {
          py::dict d;
          d["tokens"] = q.tokens;
          d["log_prob"] = q.log_prob;
          d["avg_log_prob"] = q.avg_log_prob;
          result.append(d);
        }
        return result;
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("out"), py::arg("beam") = 0,
      "beam 0 takes the width from the checkpoint config");

  m.def(
      "checkpoint_info",
      [](const std::string& path) {
        const auto c = checkpoint::load(path);
        py::dict d;
        d["kind"] = checkpoint::to_string(c.kind);
        d["fingerprint"] = config::fingerprint_hex(c.fingerprint());
        d["config"] = c.config;
        d["vocab_sizes"] = std::vector<std::size_t>{c.vocabs.words.size(), c.vocabs.pos.size(), c.vocabs.ner.size(),
                                                    c.vocabs.dep.size()};
        py::dict shapes;
        for (const auto& [name, t] : c.tensors) shapes[py::str(name)] = py::make_tuple(t.rows(), t.cols());
        d["tensors"] = shapes;
        return d;
      },
      py::arg("path"));

  // metrics
  m.def(
      "bleu",
      [](const std::vector<metrics::Sentence>& cands, const std::vector<std::vector<metrics::Sentence>>& refs,
         std::size_t max_n, bool smooth) { return bleu_dict(metrics::bleu(cands, refs, {max_n, smooth})); },
      py::arg("candidates"), py::arg("references"), py::arg("max_n") = 4, py::arg("smooth") = false,
      "corpus BLEU; references[i] is the list of references for candidates[i]");
  m.def("rouge_l", &metrics::rouge_l, py::arg("candidate"), py::arg("reference"), py::arg("beta") = 1.2);
  m.def(
      "meteor",
      [](const metrics::Sentence& c, const metrics::Sentence& r, bool stem) {
        return metrics::meteor_lite(c, r, {stem});
      },
      py::arg("candidate"), py::arg("reference"), py::arg("stem") = false);
  m.def(
      "evaluate",
      [](const std::vector<metrics::Sentence>& cands, const std::vector<metrics::Sentence>& refs, bool smooth,
         bool stem) { return from_json(metrics::evaluate(cands, refs, {4, smooth}, {stem}).to_json()); },
      py::arg("candidates"), py::arg("references"), py::arg("smooth") = false, py::arg("stem") = false);
  m.def(
      "evaluate_files",
      [](const std::string& cands, const std::string& refs, bool smooth, bool stem) {
        pipeline::EvaluateOptions o;
        o.bleu.smoothing = smooth;
        o.meteor.stemming = stem;
        return from_json(pipeline::cmd_evaluate(cands, refs, o).to_json());
      },
      py::arg("candidates"), py::arg("references"), py::arg("smooth") = false, py::arg("stem") = false);
  m.def(
      "human_eval",
      [](const std::vector<std::tuple<std::string, std::string, std::string, bool>>& rows) {
        std::vector<metrics::Judgement> js;
        for (const auto& [rater, q, crit, yes] : rows) js.push_back({rater, q, crit, yes});
        return metrics::human_eval_aggregate(js);
      },
      py::arg("rows"), "(rater, question_id, criterion, yes) rows -> mean per-rater yes percentage per criterion");
  m.def("human_eval_file", &pipeline::cmd_human, py::arg("path"));

  // answer selection decoders over fixed pointer choices
  m.def(
      "decode_forced",
      [](std::size_t length, const std::vector<std::size_t>& choices, const std::string& mode) {
        answer::ForcedScorer s(length, choices);
        if (mode == "boundary") {
          const auto span = answer::boundary_pointer_decode(s);
          std::vector<std::size_t> idx;
          for (auto i = span.start; i <= span.end; ++i) idx.push_back(i);
          return idx;
        }
        if (mode == "sequence") return answer::sequence_pointer_decode(s);
        throw ContractViolation("mode must be 'boundary' or 'sequence'");
      },
      py::arg("length"), py::arg("choices"), py::arg("mode") = "boundary",
      "1-based token indices a pointer decoder emits when every step picks the given position");
  m.def("indices_to_tokens", &answer::indices_to_tokens, py::arg("words"), py::arg("indices"));

  m.def(
      "gradcheck",
      [](std::size_t seeds, double tolerance) {
        std::vector<diff::GradSuiteRow> rows;
        {
          py::gil_scoped_release release;
          rows = diff::run_grad_suite(seeds, tolerance);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["name"] = r.name;
          d["max_rel_error"] = r.max_rel_error;
          d["entries"] = r.entries;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seeds") = 10, py::arg("tolerance") = 1e-4);
}
