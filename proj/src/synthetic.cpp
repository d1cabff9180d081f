#include "qapg/synthetic.hpp"

#include <algorithm>
#include <optional>
#include <random>

#include "qapg/errors.hpp"

namespace qapg::synthetic {

using corpus::Bio;
using corpus::Example;
using corpus::TaggedToken;

namespace {

using Rng = std::mt19937_64;

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

const char* const kPos[] = {"NN", "VBD", "DT", "IN", "JJ", "NNS"};
const char* const kDep[] = {"nsubj", "dobj", "det", "prep", "amod", "pobj"};

TaggedToken filler(Rng& rng, std::size_t vocab) {
  TaggedToken t;
  t.word = "w" + std::to_string(draw(rng, 0, vocab - 1));
  t.pos = kPos[draw(rng, 0, 5)];
  t.ner = "O";
  t.dep = kDep[draw(rng, 0, 5)];
  t.bio = Bio::O;
  return t;
}

void mark_root(std::vector<TaggedToken>& s, Rng& rng) {
  s[draw(rng, 0, s.size() - 1)].dep = "ROOT";
}

}  // namespace

std::vector<Example> sentinel_span_task(std::size_t count, std::uint64_t seed, SentinelOptions o) {
  if (o.min_length < o.max_span || o.min_length > o.max_length || o.max_span == 0) {
    throw ContractViolation("sentinel task: inconsistent lengths");
  }
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto n = draw(rng, o.min_length, o.max_length);
    const auto len = draw(rng, 1, o.max_span);
    const auto start = draw(rng, 1, n - len + 1);
    Example ex;
    for (std::size_t i = 0; i < n; ++i) ex.sentence.push_back(filler(rng, o.filler_words));
    mark_root(ex.sentence, rng);
    for (auto i = start; i < start + len; ++i) ex.sentence[i - 1].ner = "SPAN";
    ex.answer = corpus::AnswerSpan{start, start + len - 1};
    corpus::apply_bio(ex.sentence, ex.answer);
    ex.question = {"which", "span", "?"};
    ex.source_id = "sentinel-" + std::to_string(k);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> first_person_task(std::size_t count, std::uint64_t seed, EntityOptions o) {
  static const char* const kTypes[] = {"PERSON", "ORGANIZATION", "LOCATION", "DATE"};
  static const char* const kPrefix[] = {"per", "org", "loc", "date"};
  if (o.min_entities == 0 || o.min_entities > o.max_entities) {
    throw ContractViolation("entity task: inconsistent entity counts");
  }
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto entities = draw(rng, o.min_entities, o.max_entities);
    std::vector<std::size_t> types(entities);
    for (auto& t : types) t = draw(rng, 0, 3);
    types[draw(rng, 0, entities - 1)] = 0;  // at least one PERSON

    // Entity runs separated by at least one filler token so runs of the
    // same type never merge.
    std::vector<std::vector<TaggedToken>> runs;
    std::size_t entity_tokens = 0;
    for (auto t : types) {
      std::vector<TaggedToken> run;
      const auto len = draw(rng, 1, 3);
      for (std::size_t i = 0; i < len; ++i) {
        TaggedToken tok;
        tok.word = std::string(kPrefix[t]) + std::to_string(draw(rng, 0, o.names_per_type - 1));
        tok.pos = t == 3 ? "CD" : "NNP";
        tok.ner = kTypes[t];
        tok.dep = "compound";
        run.push_back(tok);
      }
      entity_tokens += len;
      runs.push_back(std::move(run));
    }
    const auto min_n = std::max(o.min_length, entity_tokens + entities + 1);
    const auto n = draw(rng, min_n, std::max(min_n, o.max_length));
    auto fillers = n - entity_tokens;
    // gaps[0] before the first run, gaps[entities] after the last; inner
    // gaps get at least one token.
    std::vector<std::size_t> gaps(entities + 1, 0);
    for (std::size_t i = 1; i < entities; ++i) gaps[i] = 1;
    fillers -= entities - 1;
    for (std::size_t i = 0; i < fillers; ++i) ++gaps[draw(rng, 0, entities)];

    Example ex;
    std::optional<corpus::AnswerSpan> answer;
    for (std::size_t e = 0; e <= entities; ++e) {
      for (std::size_t i = 0; i < gaps[e]; ++i) ex.sentence.push_back(filler(rng, o.filler_words));
      if (e == entities) break;
      const auto start = ex.sentence.size() + 1;
      for (const auto& tok : runs[e]) ex.sentence.push_back(tok);
      if (!answer && types[e] == 0) answer = corpus::AnswerSpan{start, ex.sentence.size()};
    }
    mark_root(ex.sentence, rng);
    ex.answer = answer;
    corpus::apply_bio(ex.sentence, ex.answer);
    ex.question = {"who", "?"};
    ex.source_id = "entity-" + std::to_string(k);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace qapg::synthetic
