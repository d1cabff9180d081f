#include <doctest.h>

#include <cmath>
#include <limits>

#include "qapg/corpus.hpp"
#include "qapg/errors.hpp"
#include "qapg/gradsuite.hpp"
#include "qapg/synthetic.hpp"
#include "qapg/tasks.hpp"
#include "qapg/training.hpp"

using namespace qapg;
using diff::Graph;
using diff::Tensor;

namespace {

// Loss (w - target_i)^2 on a single scalar parameter.
struct Quadratic {
  diff::ParamSet<float> params;
  std::vector<float> targets = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f};

  Quadratic() { params.add("w", 1, 1); }

  train::ExampleLoss loss() {
    return [this](Graph<float>& g, std::size_t i, diff::Rng&) {
      const auto w = g.param(params.at("w"));
      const auto d = g.sub(w, g.constant(Tensor<float>(1, 1, targets[i])));
      return std::make_pair(g.sum(g.mul(d, d)), 1.0);
    };
  }
};

train::FitOptions quick(std::size_t epochs) {
  train::FitOptions o;
  o.epochs = epochs;
  o.batch_size = 2;
  o.lr.base = 0.05;
  o.lr.start_epoch = 1000;
  return o;
}

}  // namespace

TEST_CASE("fit input checks") {
  Quadratic q;
  CHECK_THROWS_AS(train::fit(q.params, 0, q.loss(), quick(1)), DataError);
  auto bad = quick(1);
  bad.batch_size = 0;
  CHECK_THROWS_AS(train::fit(q.params, 5, q.loss(), bad), ContractViolation);

  auto nan_loss = [](Graph<float>& g, std::size_t, diff::Rng&) {
    return std::make_pair(g.constant(Tensor<float>(1, 1, std::numeric_limits<float>::quiet_NaN())), 1.0);
  };
  CHECK_THROWS_AS(train::fit(q.params, 5, nan_loss, quick(1)), NumericError);
}

TEST_CASE("fit converges and is reproducible") {
  Quadratic a, b;
  const auto ra = train::fit(a.params, 5, a.loss(), quick(300));
  const auto rb = train::fit(b.params, 5, b.loss(), quick(300));
  CHECK(a.params.at("w").value[0] == doctest::Approx(3.0).epsilon(0.02));
  CHECK(a.params.at("w").value == b.params.at("w").value);
  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) CHECK(ra.log[i].train_loss == rb.log[i].train_loss);
  CHECK(ra.log.back().train_loss < ra.log.front().train_loss);
}

TEST_CASE("the epoch with the best validation score is restored") {
  Quadratic q;
  const std::vector<double> scores = {5.0, 2.0, 3.0, 4.0, 2.5};
  std::size_t calls = 0;
  std::vector<float> seen;
  auto validate = [&] { return scores[calls++]; };
  auto record = [&](const train::EpochLog&) { seen.push_back(q.params.at("w").value[0]); };
  const auto r = train::fit(q.params, 5, q.loss(), quick(5), validate, record);
  CHECK(r.best_epoch == 2);
  CHECK(q.params.at("w").value[0] == seen[1]);
  CHECK(seen[1] != seen[4]);
}

TEST_CASE("stop_at_train_ppl ends the run early") {
  Quadratic q;
  q.targets.assign(5, 0.5f);
  auto o = quick(500);
  o.stop_at_train_ppl = 1.01;
  const auto r = train::fit(q.params, 5, q.loss(), o);
  CHECK(r.stopped_early);
  CHECK(r.log.size() < 500);
  CHECK(r.log.back().train_ppl < 1.01);
}

TEST_CASE("QG training lowers perplexity and keeps the best validation checkpoint") {
  const auto examples = corpus::read_corpus(QAPG_FIXTURE_DIR "/toy32.tsv").examples;
  REQUIRE(examples.size() == 32);
  const auto vocabs = corpus::build_corpus_vocabularies(examples, 0);
  tasks::QgEncoding enc;
  enc.spec = model::FeatureSpec::from_vocabularies(8, vocabs, true, true);
  const std::vector<corpus::Example> train_ex(examples.begin(), examples.begin() + 24);
  const std::vector<corpus::Example> valid_ex(examples.begin() + 24, examples.end());
  const auto train_data = tasks::encode_qg(train_ex, enc, vocabs);
  const auto valid_data = tasks::encode_qg(valid_ex, enc, vocabs);

  model::QgDims dims;
  dims.input = enc.spec;
  dims.vocab_size = vocabs.words.size();
  dims.hidden = 16;
  model::QgModel<float> m(dims);
  diff::Rng rng(1);
  m.params().init_uniform(rng, -0.1, 0.1);
  const double before = tasks::perplexity(m, train_data);

  auto o = quick(8);
  o.lr.base = 0.01;
  o.batch_size = 4;
  const auto r = tasks::train_qg(m, train_data, &valid_data, o);
  CHECK(tasks::perplexity(m, train_data) < before);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.log) best = std::min(best, *e.valid_score);
  CHECK(tasks::perplexity(m, valid_data) == doctest::Approx(best).epsilon(1e-6));
  CHECK(*r.log[r.best_epoch - 1].valid_score == best);
}

TEST_CASE("pointer and NE training reduce their losses") {
  const auto spans = synthetic::sentinel_span_task(60, 3);
  const auto vocabs = corpus::build_corpus_vocabularies(spans, 0);
  const auto spec = model::FeatureSpec::from_vocabularies(8, vocabs, true, false);
  const auto data = tasks::encode_spans(spans, spec, vocabs);
  REQUIRE(data.size() == 60);

  answer::PointerDims pd;
  pd.input = spec;
  pd.vocab_size = vocabs.words.size();
  pd.hidden = 8;
  pd.decoder_hidden = 8;
  pd.attention = 8;
  answer::PointerNet<float> net(pd);
  diff::Rng rng(2);
  net.params().init_uniform(rng, -0.1, 0.1);
  const double before = tasks::pointer_perplexity(net, data, answer::PointerMode::Boundary);
  tasks::train_pointer(net, answer::PointerMode::Boundary, data, nullptr, quick(4));
  CHECK(tasks::pointer_perplexity(net, data, answer::PointerMode::Boundary) < before);

  const auto ents = synthetic::first_person_task(60, 4);
  const auto ev = corpus::build_corpus_vocabularies(ents, 0);
  const auto espec = model::FeatureSpec::from_vocabularies(8, ev, true, false);
  const auto ne_data = tasks::encode_ne(ents, espec, ev);
  REQUIRE(ne_data.size() == 60);
  answer::NeDims nd;
  nd.input = espec;
  nd.vocab_size = ev.words.size();
  nd.hidden = 8;
  answer::NeSelector<float> sel(nd);
  sel.params().init_uniform(rng, -0.1, 0.1);
  const auto r = tasks::train_ne(sel, ne_data, nullptr, quick(6));
  CHECK(r.log.back().train_loss < r.log.front().train_loss);
  const double acc = tasks::ne_accuracy(sel, ne_data);
  CHECK((acc >= 0.0 && acc <= 1.0));
}

TEST_CASE("gradient suite passes for every op and model loss") {
  const auto rows = diff::run_grad_suite(10, 1e-4);
  CHECK(rows.size() == diff::gradcheck_cases().size());
  for (const auto& row : rows) {
    INFO(row.name << " max rel error " << row.max_rel_error);
    CHECK(row.passed);
    CHECK(row.entries > 0);
  }
  CHECK_THROWS_AS(diff::run_grad_check("no_such_op", 1), ContractViolation);
}
