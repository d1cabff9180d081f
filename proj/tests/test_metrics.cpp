#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "qapg/errors.hpp"
#include "qapg/metrics.hpp"
#include "support/oracles.hpp"

using namespace qapg::metrics;
using qapg::testing::random_words;

namespace {

Sentence words(std::initializer_list<const char*> w) { return Sentence(w.begin(), w.end()); }

}  // namespace

TEST_CASE("bleu hand cases") {
  const std::vector<Sentence> refs = {words({"who", "wrote", "it", "?"}), words({"where", "is", "the", "cat", "now"})};
  const auto same = bleu(refs, refs);
  for (double s : same.scores) CHECK(s == doctest::Approx(100.0).epsilon(1e-12));

  const auto clipped = bleu({words({"the", "the", "the", "the"})}, {words({"the", "cat"})});
  CHECK(clipped.scores[0] == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(clipped.brevity_penalty == 1.0);

  const auto disjoint = bleu({words({"x", "y", "z"})}, {words({"a", "b", "c"})});
  for (double s : disjoint.scores) CHECK(s == 0.0);

  // c = 2, r = 4: BP = exp(1 - 2) and unigram precision 1.
  const auto short_cand = bleu({words({"a", "b"})}, {words({"a", "b", "c", "d"})});
  CHECK(short_cand.scores[0] == doctest::Approx(100.0 * std::exp(-1.0)));
}

TEST_CASE("bleu closest reference length prefers the shorter on ties") {
  // Candidate length 3; references of length 2 and 4 are equally close.
  const std::vector<std::vector<Sentence>> refs = {{words({"a", "b", "c", "d"}), words({"a", "b"})}};
  const auto r = bleu({words({"a", "b", "c"})}, refs);
  CHECK(r.reference_length == 2);
  CHECK(r.brevity_penalty == 1.0);
}

TEST_CASE("bleu smoothing and errors") {
  BleuOptions smooth;
  smooth.smoothing = true;
  const auto empty = bleu({Sentence{}}, {words({"a"})}, smooth);
  for (double s : empty.scores) CHECK(s == 0.0);
  // Two unigram hits but no bigram: unsmoothed BLEU-2 is 0, smoothed is not.
  const auto plain = bleu({words({"b", "a"})}, {words({"a", "b"})});
  CHECK(plain.scores[1] == 0.0);
  CHECK(bleu({words({"b", "a"})}, {words({"a", "b"})}, smooth).scores[1] > 0.0);
  CHECK_THROWS_AS(bleu(std::vector<Sentence>{}, std::vector<Sentence>{}), qapg::DataError);
  CHECK_THROWS_AS(bleu({words({"a"})}, std::vector<Sentence>{}), qapg::DataError);
}

TEST_CASE("bleu is invariant to corpus order and monotone under perfect pairs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> c, r;
    for (int i = 0; i < 6; ++i) {
      c.push_back(random_words(rng, 8, 4));
      r.push_back(random_words(rng, 8, 4));
    }
    const auto base = bleu(c, r);
    std::vector<std::size_t> perm(c.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Sentence> pc, pr;
    for (auto i : perm) {
      pc.push_back(c[i]);
      pr.push_back(r[i]);
    }
    const auto shuffled = bleu(pc, pr);
    for (std::size_t n = 0; n < 4; ++n) CHECK(shuffled.scores[n] == doctest::Approx(base.scores[n]).epsilon(1e-12));

    const auto extra = random_words(rng, 8, 4);
    c.push_back(extra);
    r.push_back(extra);
    CHECK(bleu(c, r).scores[0] >= base.scores[0] - 1e-9);
    for (double s : base.scores) CHECK((s >= 0.0 && s <= 100.0));
  }
}

TEST_CASE("rouge_l") {
  CHECK(rouge_l(words({"a", "b"}), words({"a", "b"})) == doctest::Approx(100.0));
  CHECK(rouge_l(words({"a", "b"}), words({"c"})) == 0.0);
  CHECK(rouge_l(words({"a", "b", "c", "d"}), words({"a", "c", "d"})) == doctest::Approx(87.98).epsilon(1e-4));
  CHECK_THROWS_AS(rouge_l(words({"a"}), Sentence{}), qapg::DataError);
}

TEST_CASE("rouge_l matches the recursive LCS oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_words(rng, 20, 5);
    const auto b = random_words(rng, 20, 5);
    REQUIRE(lcs_length(a, b) == qapg::testing::lcs_oracle(a, b));
    CHECK(rouge_l(a, b) == qapg::testing::rouge_l_oracle(a, b));
  }
}

TEST_CASE("meteor_lite") {
  // P = R = 1, one chunk of three matches: 100 (1 - 0.5/27).
  CHECK(meteor_lite(words({"a", "b", "c"}), words({"a", "b", "c"})) == doctest::Approx(98.148148).epsilon(1e-6));
  CHECK(meteor_lite(words({"x"}), words({"a", "b"})) == 0.0);
  CHECK_THROWS_AS(meteor_lite(words({"a"}), Sentence{}), qapg::DataError);

  // "a b" could align to either "a b" in the reference; the adjacent one
  // gives a single chunk.
  const auto a = meteor_align(words({"a", "b"}), words({"a", "x", "a", "b"}));
  CHECK(a.matches == 2);
  CHECK(a.chunks == 1);
}

TEST_CASE("meteor alignment matches exhaustive search on short sentences") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 400; ++trial) {
    const auto c = random_words(rng, 8, 3);
    const auto r = random_words(rng, 8, 3);
    const auto got = meteor_align(c, r);
    const auto want = qapg::testing::meteor_alignment_oracle(c, r);
    REQUIRE(got.matches == want.matches);
    REQUIRE(got.chunks == want.chunks);
    CHECK(meteor_lite(c, r) == doctest::Approx(qapg::testing::meteor_oracle(c, r)).epsilon(1e-12));
  }
}

TEST_CASE("meteor stemming stage") {
  CHECK(light_stem("cities") == "city");
  CHECK(light_stem("walked") == "walk");
  CHECK(light_stem("class") == "class");
  MeteorOptions stem;
  stem.stemming = true;
  CHECK(meteor_align(words({"cats"}), words({"cat"})).matches == 0);
  CHECK(meteor_align(words({"cats"}), words({"cat"}), stem).matches == 1);
}

TEST_CASE("perplexity") {
  CHECK(perplexity_from_nll(10 * std::log(50.0), 10) == doctest::Approx(50.0));
  CHECK(perplexity_from_nll(0.0, 7) == 1.0);
  CHECK_THROWS_AS(perplexity_from_nll(1.0, 0), qapg::DataError);
}

namespace {

std::vector<Judgement> table_from_totals(const std::vector<int>& yes_totals, int questions) {
  std::vector<Judgement> out;
  for (std::size_t r = 0; r < yes_totals.size(); ++r) {
    for (int q = 0; q < questions; ++q) {
      out.push_back({"r" + std::to_string(r), "q" + std::to_string(q), "fluency", q < yes_totals[r]});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("human_eval_aggregate") {
  const auto agg = human_eval_aggregate(table_from_totals({80, 79, 73}, 100));
  CHECK(agg.at("fluency") == doctest::Approx(77.33).epsilon(1e-4));
  CHECK(human_eval_aggregate(table_from_totals({100, 100}, 10)).at("fluency") == 100.0);
  CHECK(human_eval_aggregate(table_from_totals({7}, 20)).at("fluency") == doctest::Approx(35.0));

  auto missing = table_from_totals({5, 5}, 10);
  missing.erase(missing.begin() + 3);
  try {
    human_eval_aggregate(missing);
    FAIL("expected missing cells");
  } catch (const qapg::DataError& e) {
    CHECK(std::string(e.what()).find("(r0, q3, fluency)") != std::string::npos);
  }
}

TEST_CASE("parse_judgements") {
  const auto rows = parse_judgements("rater,question_id,criterion,judgement\na,q1,syntax,1\nb,q1,syntax,0\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].yes);
  CHECK_FALSE(rows[1].yes);
  CHECK_THROWS_AS(parse_judgements("a,q1,syntax,2\n"), qapg::ParseError);
  CHECK_THROWS_AS(parse_judgements("a,q1,1\n"), qapg::ParseError);
}

TEST_CASE("metric report is deterministic and bounded") {
  const std::vector<Sentence> c = {words({"who", "is", "he", "?"}), words({"what", "year", "?"})};
  const std::vector<Sentence> r = {words({"who", "was", "he", "?"}), words({"which", "year", "?"})};
  const auto a = evaluate(c, r);
  const auto b = evaluate(c, r);
  CHECK(a.to_json() == b.to_json());
  const auto j = nlohmann::json::parse(a.to_json());
  for (const char* k : {"bleu_1", "bleu_2", "bleu_3", "bleu_4", "meteor", "rouge_l"}) {
    CHECK(j[k].get<double>() >= 0.0);
    CHECK(j[k].get<double>() <= 100.0);
  }
  CHECK(j["counts"]["sentences"] == 2);
  CHECK(a.to_text().find("ROUGE-L") != std::string::npos);
}
