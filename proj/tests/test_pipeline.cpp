#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "qapg/checkpoint.hpp"
#include "qapg/config.hpp"
#include "qapg/errors.hpp"
#include "qapg/pipeline.hpp"
#include "support/models.hpp"

using namespace qapg;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = QAPG_FIXTURE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh directory per call, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("qapg_" + tag + "_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

config::ExperimentConfig tiny_config(const std::string& data_dir) {
  auto cfg = config::load_config(std::string(QAPG_FIXTURE_DIR) + "/../../configs/desk.ini");
  cfg.train_path = data_dir + "/train.tsv";
  cfg.valid_path = data_dir + "/valid.tsv";
  cfg.test_path = data_dir + "/test.tsv";
  cfg.word_dim = 8;
  cfg.hidden_size = 8;
  cfg.pointer_hidden = cfg.pointer_attention = cfg.ne_hidden = 8;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.validate();
  return cfg;
}

pipeline::PrepareOptions fixture_prepare(const std::string& out) {
  pipeline::PrepareOptions o;
  o.squad_path = kFixtures + "/squad12.json";
  o.annotations_path = kFixtures + "/squad12.tagged";
  o.out_dir = out;
  return o;
}

}  // namespace

TEST_CASE("variant table") {
  using config::AnswerSource;
  const auto& t = config::variant_table();
  REQUIRE(t.size() == 7);
  const auto qg = config::variant_info(config::Variant::QG);
  CHECK_FALSE(qg.features);
  CHECK(qg.answer == AnswerSource::None);
  const auto full = config::variant_info(config::Variant::QG_F_GAE);
  CHECK(full.features);
  CHECK(full.answer == AnswerSource::GroundTruth);
  CHECK(config::variant_info(config::Variant::QG_GAE).answer == AnswerSource::GroundTruth);
  CHECK_FALSE(config::variant_info(config::Variant::QG_GAE).features);
  CHECK(config::variant_info(config::Variant::QG_F_NE).answer == AnswerSource::NeSelector);
  CHECK(config::variant_info(config::Variant::QG_F_AES).answer == AnswerSource::SequencePointer);
  CHECK(config::variant_info(config::Variant::QG_F_AEB).answer == AnswerSource::BoundaryPointer);
  for (const auto& v : t) CHECK(config::parse_variant(v.name) == v.variant);
  CHECK_THROWS_AS(config::parse_variant("QG+X"), config::ConfigError);
}

TEST_CASE("config parsing") {
  const auto cfg = config::parse_config(
      "[experiment]\nvariant = QG+F\nseed = 7\n[model]\nhidden_size = 12\n[train]\nlr_decay_mode = once\n");
  CHECK(cfg.variant == config::Variant::QG_F);
  CHECK(cfg.seed == 7);
  CHECK(cfg.hidden_size == 12);
  CHECK_FALSE(cfg.lr_decay_every_epoch);
  CHECK(cfg.word_dim == config::ExperimentConfig{}.word_dim);

  CHECK_THROWS_AS(config::parse_config("[model]\nhiden_size = 3\n"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_config("[model]\nhidden_size = many\n"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_config("[train]\nepochs = 0\n"), config::ConfigError);
  CHECK_THROWS_AS(config::parse_config("[train]\nlr_decay_mode = sometimes\n"), config::ConfigError);
  CHECK_THROWS_AS(config::load_config("/nonexistent/x.ini"), DataError);

  auto c = cfg;
  config::set_value(c, "generate.beam", "5");
  CHECK(c.beam == 5);
  CHECK_THROWS_AS(config::set_value(c, "generate.width", "5"), config::ConfigError);
}

TEST_CASE("config canonical text round trips and fingerprints") {
  for (const char* name : {"desk.ini", "full.ini"}) {
    CAPTURE(name);
    const auto cfg = config::load_config(kFixtures + "/../../configs/" + name);
    const auto again = config::parse_config(cfg.canonical_text());
    CHECK(again == cfg);
    CHECK(again.canonical_text() == cfg.canonical_text());
    CHECK(again.fingerprint() == cfg.fingerprint());
  }
  const auto full = config::load_config(kFixtures + "/../../configs/full.ini");
  CHECK(full.word_dim == 300);
  CHECK(full.hidden_size == 600);
  CHECK(full.encoder_layers == 3);
  CHECK(full.decoder_layers == 2);
  CHECK(full.dropout == doctest::Approx(0.3));
  CHECK(full.lr == doctest::Approx(1.0));
  CHECK(full.lr_decay == doctest::Approx(0.5));
  CHECK(full.lr_decay_start_epoch == 10);

  auto c = full;
  c.dropout = 0.30000000000000004;
  CHECK(c.fingerprint() != full.fingerprint());
  // FNV-1a reference values.
  CHECK(config::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(config::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(config::fingerprint_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("checkpoint persistence") {
  TempDir dir("ckpt");
  const auto cfg = config::load_config(kFixtures + "/../../configs/full.ini");
  const auto examples = corpus::read_corpus(kFixtures + "/toy32.tsv").examples;
  checkpoint::Checkpoint ckpt;
  ckpt.kind = checkpoint::ModelKind::SequencePointer;
  ckpt.config = cfg;
  ckpt.config.word_dim = 6;
  ckpt.config.pointer_hidden = ckpt.config.pointer_attention = 5;
  ckpt.vocabs = corpus::build_corpus_vocabularies(examples, 0);
  auto net = pipeline::make_pointer(ckpt.config, ckpt.vocabs);
  diff::Rng rng(3);
  net.params().init_uniform(rng, -0.1, 0.1);
  checkpoint::store_params(ckpt, net.params());

  checkpoint::save(dir / "a.ckpt", ckpt);
  const auto loaded = checkpoint::load(dir / "a.ckpt");
  checkpoint::save(dir / "b.ckpt", loaded);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(loaded.kind == ckpt.kind);
  CHECK(loaded.config == ckpt.config);
  CHECK(loaded.vocabs.words == ckpt.vocabs.words);
  CHECK(loaded.vocabs.dep == ckpt.vocabs.dep);
  CHECK(loaded.fingerprint() == ckpt.fingerprint());

  auto other = pipeline::make_pointer(ckpt.config, ckpt.vocabs);
  checkpoint::load_params(loaded, other.params());
  for (const auto& [name, p] : net.params()) CHECK(other.params().at(name).value == p.value);

  const auto bytes = checkpoint::serialize(ckpt);
  SUBCASE("version mismatch") {
    auto b = bytes;
    b[8] = 2;
    CHECK_THROWS_WITH_AS(checkpoint::deserialize(b), doctest::Contains("version"), DataError);
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK_THROWS_AS(checkpoint::deserialize(b), DataError);
  }
  SUBCASE("fingerprint mismatch") {
    auto b = bytes;
    b[12] ^= 1;
    CHECK_THROWS_WITH_AS(checkpoint::deserialize(b), doctest::Contains("fingerprint"), DataError);
  }
  SUBCASE("truncation and trailing bytes") {
    for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
      CHECK_THROWS_AS(checkpoint::deserialize(bytes.substr(0, cut)), DataError);
    }
    CHECK_THROWS_AS(checkpoint::deserialize(bytes + "x"), DataError);
  }
  SUBCASE("shape mismatch") {
    auto cfg2 = ckpt.config;
    cfg2.pointer_hidden = 7;
    auto wrong = pipeline::make_pointer(cfg2, ckpt.vocabs);
    CHECK_THROWS_WITH_AS(checkpoint::load_params(loaded, wrong.params()), doctest::Contains("shape"), DataError);
  }
  CHECK_THROWS_AS(checkpoint::load(dir / "missing.ckpt"), DataError);
  CHECK(checkpoint::parse_model_kind("boundary") == checkpoint::ModelKind::BoundaryPointer);
  CHECK_THROWS_AS(checkpoint::parse_model_kind("crf"), DataError);
}

TEST_CASE("split is a seeded permutation") {
  std::vector<corpus::Example> xs(12);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i].source_id = std::to_string(i);
  const auto a = pipeline::split_examples(xs, 13, 1.0 / 6.0, 1.0 / 6.0);
  const auto b = pipeline::split_examples(xs, 13, 1.0 / 6.0, 1.0 / 6.0);
  CHECK(a.train.size() == 8);
  CHECK(a.valid.size() == 2);
  CHECK(a.test.size() == 2);
  CHECK(a.train == b.train);
  std::multiset<std::string> seen;
  for (const auto* part : {&a.train, &a.valid, &a.test}) {
    for (const auto& e : *part) seen.insert(e.source_id);
  }
  CHECK(seen.size() == 12);
  CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 12);
  CHECK_THROWS_AS(pipeline::split_examples(xs, 1, 0.5, 0.5), ContractViolation);
}

TEST_CASE("prepare on the fixture corpus") {
  TempDir one("prep1"), two("prep2");
  const auto r1 = pipeline::cmd_prepare(fixture_prepare(one.path.string()));
  const auto r2 = pipeline::cmd_prepare(fixture_prepare(two.path.string()));
  CHECK(r1.records == 12);
  CHECK(r1.errors.empty());
  CHECK(r1.train == 8);
  CHECK(r1.valid == 2);
  CHECK(r1.test == 2);
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "vocab.words.txt", "vocab.pos.txt", "vocab.ner.txt",
                        "vocab.dep.txt", "prepare_report.json"}) {
    CAPTURE(f);
    CHECK(slurp(one / f) == slurp(two / f));
  }
  // Every written answer column matches the BIO tags.
  for (const auto& ex : corpus::read_corpus(one / "train.tsv").examples) {
    std::vector<corpus::Bio> tags;
    for (const auto& t : ex.sentence) tags.push_back(t.bio);
    CHECK(corpus::decode_bio(tags) == ex.answer);
  }

  auto bad = fixture_prepare(one / "x");
  bad.squad_path = kFixtures + "/no_such.json";
  CHECK_THROWS_WITH(pipeline::cmd_prepare(bad), doctest::Contains("no_such.json"));
  bad = fixture_prepare(one / "x");
  bad.annotations_path = kFixtures + "/no_such.tagged";
  CHECK_THROWS_WITH(pipeline::cmd_prepare(bad), doctest::Contains("no_such.tagged"));
}

TEST_CASE("training rejects data the variant cannot use") {
  TempDir dir("val");
  pipeline::cmd_prepare(fixture_prepare(dir.path.string()));
  auto cfg = tiny_config(dir.path.string());
  auto examples = corpus::read_corpus(cfg.train_path).examples;
  for (auto& e : examples) {
    e.answer.reset();
    corpus::apply_bio(e.sentence, std::nullopt);
  }
  CHECK_THROWS_AS(pipeline::validate_training_data(cfg, checkpoint::ModelKind::Qg, examples), config::ConfigError);
  CHECK_THROWS_AS(pipeline::validate_training_data(cfg, checkpoint::ModelKind::BoundaryPointer, examples),
                  config::ConfigError);
  cfg.variant = config::Variant::QG_F;
  CHECK_NOTHROW(pipeline::validate_training_data(cfg, checkpoint::ModelKind::Qg, examples));
  for (auto& e : examples) {
    for (auto& t : e.sentence) t.ner = "O";
  }
  CHECK_THROWS_AS(pipeline::validate_training_data(cfg, checkpoint::ModelKind::NeSelector, examples),
                  config::ConfigError);
  CHECK_THROWS_AS(pipeline::validate_training_data(cfg, checkpoint::ModelKind::Qg, {}), DataError);
}

TEST_CASE("same-seed pipeline runs are identical") {
  auto run = [](const TempDir& dir) {
    pipeline::cmd_prepare(fixture_prepare(dir.path.string()));
    const auto cfg = tiny_config(dir.path.string());
    pipeline::cmd_train(cfg, checkpoint::ModelKind::BoundaryPointer, dir / "b.ckpt", dir / "brun");
    pipeline::cmd_train(cfg, checkpoint::ModelKind::Qg, dir / "qg.ckpt", dir / "qrun");
    pipeline::cmd_select_answer(dir / "b.ckpt", dir / "test.tsv", dir / "test.sel.tsv");
    pipeline::cmd_generate(dir / "qg.ckpt", dir / "test.sel.tsv", dir / "q.txt");
    const auto report = pipeline::cmd_evaluate(dir / "q.txt", dir / "test.tsv");
    return report.to_json();
  };
  // Same directory both times: the data paths are part of the config text.
  TempDir dir("run");
  const std::vector<std::string> files = {"b.ckpt", "qg.ckpt", "brun/epochs.jsonl", "brun/summary.json",
                                          "qrun/epochs.jsonl", "qrun/summary.json", "qrun/config.ini",
                                          "test.sel.tsv", "q.txt", "q.txt.jsonl", "prepare_report.json"};
  const auto a = run(dir);
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(dir / f));
  const auto b = run(dir);
  CHECK(a == b);
  for (std::size_t i = 0; i < files.size(); ++i) {
    CAPTURE(files[i]);
    CHECK_FALSE(first[i].empty());
    CHECK(slurp(dir / files[i]) == first[i]);
  }
  CHECK(config::load_config(dir / "qrun/config.ini") == tiny_config(dir.path.string()));
}

TEST_CASE("generate beam width defaults to the checkpoint config") {
  TempDir dir("beam");
  pipeline::cmd_prepare(fixture_prepare(dir.path.string()));
  auto cfg = tiny_config(dir.path.string());
  cfg.valid_path.clear();
  REQUIRE(cfg.beam == 3);
  pipeline::cmd_train(cfg, checkpoint::ModelKind::Qg, dir / "qg.ckpt");
  const auto dflt = pipeline::cmd_generate(dir / "qg.ckpt", dir / "train.tsv", dir / "d.txt");
  const auto three = pipeline::cmd_generate(dir / "qg.ckpt", dir / "train.tsv", dir / "3.txt", 3);
  const auto one = pipeline::cmd_generate(dir / "qg.ckpt", dir / "train.tsv", dir / "1.txt", 1);
  REQUIRE(dflt.size() == 8);
  CHECK(slurp(dir / "d.txt") == slurp(dir / "3.txt"));
  CHECK(one.size() == dflt.size());
  const auto lines = pipeline::read_questions(dir / "d.txt");
  REQUIRE(lines.size() == dflt.size());
  for (std::size_t i = 0; i < lines.size(); ++i) CHECK(lines[i] == dflt[i].tokens);
}
