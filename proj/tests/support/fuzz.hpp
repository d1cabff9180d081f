#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qapg/corpus.hpp"

namespace qapg::testing {

inline std::optional<corpus::AnswerSpan> random_span(std::mt19937_64& rng, std::size_t length) {
  if (rng() % 5 == 0) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pos(1, length);
  auto a = pos(rng);
  auto b = pos(rng);
  if (a > b) std::swap(a, b);
  return corpus::AnswerSpan{a, b};
}

// Printable non-space, non-'|' characters, including UTF-8 multibyte words.
inline std::string random_field(std::mt19937_64& rng, bool allow_empty) {
  static const std::vector<std::string> pieces = {"a", "Z", "0", "-", "'", ".", ",", "\xc3\xa9",
                                                  "\xe2\x82\xac", "<", ">", "_", "q", "NN"};
  const std::size_t n = (allow_empty ? 0 : 1) + rng() % 6;
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += pieces[rng() % pieces.size()];
  return out;
}

inline std::vector<corpus::TaggedToken> random_tagged_sentence(std::mt19937_64& rng,
                                                               std::size_t length) {
  std::vector<corpus::TaggedToken> tokens;
  for (std::size_t i = 0; i < length; ++i) {
    tokens.push_back({random_field(rng, false), random_field(rng, true), random_field(rng, true),
                      random_field(rng, true), corpus::Bio::O});
  }
  corpus::apply_bio(tokens, random_span(rng, length));
  return tokens;
}

}  // namespace qapg::testing
