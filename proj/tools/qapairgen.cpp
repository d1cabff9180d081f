// qapairgen: prepare data, train, select answers, generate and score questions.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "qapg/errors.hpp"
#include "qapg/pipeline.hpp"

namespace {

using namespace qapg;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("qapairgen");
  logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("QAPAIRGEN_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Question-answer pair generation: answer selection and question generation"};
  app.require_subcommand(1);

  // prepare
  pipeline::PrepareOptions prep;
  auto* prepare = app.add_subcommand("prepare", "SQuAD JSON + annotation file -> tagged train/valid/test splits");
  prepare->add_option("--squad", prep.squad_path, "SQuAD v1.1 JSON file")->required();
  prepare->add_option("--annotations", prep.annotations_path, "tagged lines for the context sentences")->required();
  prepare->add_option("--out", prep.out_dir, "output directory")->required();
  prepare->add_option("--seed", prep.seed, "split seed")->capture_default_str();
  prepare->add_option("--valid-fraction", prep.valid_fraction)->capture_default_str();
  prepare->add_option("--test-fraction", prep.test_fraction)->capture_default_str();
  prepare->add_option("--max-vocab", prep.max_vocab, "word vocabulary cap, 0 for none")->capture_default_str();

  // train
  std::string config_path, model_name = "qg", ckpt_out, run_dir, variant;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "train one network and write a checkpoint");
  train->add_option("--config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  train->add_option("--model", model_name, "qg | boundary | sequence | ne")
      ->check(CLI::IsMember({"qg", "boundary", "sequence", "ne"}))
      ->capture_default_str();
  train->add_option("--out", ckpt_out, "checkpoint path")->required();
  train->add_option("--run-dir", run_dir, "directory for logs, config copy and summary");
  train->add_option("--seed", seed, "overrides experiment.seed");
  train->add_option("--variant", variant, "overrides experiment.variant (QG, QG+F, ..., QG+F+GAE)");
  train->add_option("--set", overrides, "section.key=value override, repeatable");

  // select-answer
  std::string sel_ckpt, sel_fallback, sel_in, sel_out;
  auto* select = app.add_subcommand("select-answer", "predict answer spans and rewrite the answer column");
  select->add_option("--checkpoint", sel_ckpt, "ne, boundary or sequence checkpoint")->required();
  select->add_option("--fallback", sel_fallback, "pointer checkpoint for sentences without entities");
  select->add_option("--in", sel_in, "tagged corpus file")->required();
  select->add_option("--out", sel_out, "output corpus file")->required();

  // generate
  std::string gen_ckpt, gen_in, gen_out;
  std::size_t beam = 0;
  auto* generate = app.add_subcommand("generate", "generate one question per input line");
  generate->add_option("--checkpoint", gen_ckpt, "qg checkpoint")->required();
  generate->add_option("--in", gen_in, "tagged corpus file")->required();
  generate->add_option("--out", gen_out, "questions file (scores go to <out>.jsonl)")->required();
  generate->add_option("--beam", beam, "beam width; default from the checkpoint config (3)");

  // evaluate
  std::string cand_path, ref_path, eval_out, human_path;
  pipeline::EvaluateOptions eval_opts;
  bool json_out = false;
  auto* evaluate = app.add_subcommand("evaluate", "BLEU 1-4, METEOR-lite and ROUGE-L against references");
  evaluate->add_option("--candidates", cand_path, "one question per line");
  evaluate->add_option("--references", ref_path, "corpus file or one question per line");
  evaluate->add_option("--out", eval_out, "write the report here instead of stdout");
  evaluate->add_flag("--json", json_out, "JSON report");
  evaluate->add_flag("--smooth", eval_opts.bleu.smoothing, "add-one smoothing for n >= 2");
  evaluate->add_flag("--stem", eval_opts.meteor.stemming, "METEOR stem matching stage");
  evaluate->add_option("--human", human_path, "rater,question_id,criterion,judgement CSV to aggregate");

  // gradcheck
  std::size_t seeds = 10;
  double tolerance = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op and model loss");
  gradcheck->add_option("--seeds", seeds)->capture_default_str();
  gradcheck->add_option("--tolerance", tolerance)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*prepare) {
      pipeline::cmd_prepare(prep);
    } else if (*train) {
      auto cfg = config::load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (!variant.empty()) cfg.variant = config::parse_variant(variant);
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected section.key=value, got '" + o + "'");
        config::set_value(cfg, o.substr(0, eq), o.substr(eq + 1));
      }
      cfg.validate();
      const auto summary =
          pipeline::cmd_train(cfg, checkpoint::parse_model_kind(model_name), ckpt_out, run_dir);
      std::cout << summary.to_json();
    } else if (*select) {
      pipeline::cmd_select_answer(sel_ckpt, sel_in, sel_out, sel_fallback);
    } else if (*generate) {
      pipeline::cmd_generate(gen_ckpt, gen_in, gen_out, beam);
    } else if (*evaluate) {
      std::string text;
      nlohmann::ordered_json human;
      if (!human_path.empty()) {
        for (const auto& [criterion, score] : pipeline::cmd_human(human_path)) human[criterion] = score;
      }
      if (!cand_path.empty() || !ref_path.empty()) {
        if (cand_path.empty() || ref_path.empty()) {
          throw CLI::ValidationError("evaluate", "--candidates and --references go together");
        }
        const auto report = pipeline::cmd_evaluate(cand_path, ref_path, eval_opts);
        if (json_out) {
          auto j = nlohmann::ordered_json::parse(report.to_json());
          if (!human.empty()) j["human"] = human;
          text = j.dump(2) + "\n";
        } else {
          text = report.to_text();
        }
      } else if (human.empty()) {
        throw CLI::ValidationError("evaluate", "nothing to evaluate: give --candidates/--references or --human");
      }
      if (!human.empty() && !json_out) {
        for (const auto& [criterion, score] : human.items()) {
          text += "human " + criterion + ": " + std::to_string(score.get<double>()) + "\n";
        }
      } else if (!human.empty() && text.empty()) {
        text = nlohmann::ordered_json{{"human", human}}.dump(2) + "\n";
      }
      write_text(eval_out, text);
    } else if (*gradcheck) {
      const auto rows = diff::run_grad_suite(seeds, tolerance);
      std::cout << pipeline::format_grad_table(rows, tolerance);
      for (const auto& r : rows) {
        if (!r.passed) return kNumeric;
      }
    }
  } catch (const CLI::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kNumeric;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const ContractViolation& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kOk;
}
