#pragma once

#include <random>
#include <vector>

#include "qapg/features.hpp"

namespace qapg::testing {

// Random word ids >= 4 and one active column per tag channel.
inline model::SourceInput random_source(std::mt19937_64& rng, std::size_t n, const model::FeatureSpec& spec,
                                        std::size_t vocab_size) {
  model::SourceInput s;
  for (std::size_t t = 0; t < n; ++t) {
    s.words.push_back(static_cast<std::int32_t>(4 + rng() % (vocab_size - 4)));
    std::vector<std::uint32_t> cols;
    std::size_t offset = 0;
    for (std::size_t w : {spec.pos_width, spec.ner_width, spec.dep_width}) {
      if (w) cols.push_back(static_cast<std::uint32_t>(offset + rng() % w));
      offset += w;
    }
    if (spec.bio) cols.push_back(static_cast<std::uint32_t>(offset + rng() % 3));
    s.active.push_back(cols);
  }
  return s;
}

inline model::FeatureSpec small_spec() {
  model::FeatureSpec spec;
  spec.word_dim = 4;
  spec.pos_width = 2;
  spec.ner_width = 3;
  spec.dep_width = 2;
  return spec;
}

}  // namespace qapg::testing
