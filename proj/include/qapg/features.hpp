#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qapg/corpus.hpp"
#include "qapg/graph.hpp"

namespace qapg::model {

// Input layout per token: word embedding, then one-hot POS, NER, DEP and BIO
// blocks in that order. Column 0 of each tag block is the unknown-tag column;
// a vocabulary id k >= 4 lands in column k - 3.
struct FeatureSpec {
  static constexpr std::size_t kBioWidth = 3;

  std::size_t word_dim = 0;
  std::size_t pos_width = 0;
  std::size_t ner_width = 0;
  std::size_t dep_width = 0;
  bool bio = true;

  std::size_t feature_width() const { return pos_width + ner_width + dep_width + (bio ? kBioWidth : 0); }
  std::size_t total() const { return word_dim + feature_width(); }

  // Tag channels are sized from the vocabularies when `features` is set and
  // left empty otherwise.
  static FeatureSpec from_vocabularies(std::size_t word_dim, const corpus::CorpusVocabularies& vocabs,
                                       bool features, bool bio);

  bool operator==(const FeatureSpec&) const = default;
};

std::size_t channel_width(const corpus::Vocabulary& vocab);

struct FeatureWarnings {
  std::size_t unknown_pos = 0;
  std::size_t unknown_ner = 0;
  std::size_t unknown_dep = 0;

  std::size_t total() const { return unknown_pos + unknown_ner + unknown_dep; }
  FeatureWarnings& operator+=(const FeatureWarnings& o);
};

// Word ids plus, per token, the active one-hot columns (relative to the start
// of the feature block).
struct SourceInput {
  std::vector<std::int32_t> words;
  std::vector<std::vector<std::uint32_t>> active;

  std::size_t size() const { return words.size(); }
};

// With `force_outside` every BIO tag is treated as O.
SourceInput encode_source(const std::vector<corpus::TaggedToken>& tokens, const FeatureSpec& spec,
                          const corpus::CorpusVocabularies& vocabs, FeatureWarnings* warnings = nullptr,
                          bool force_outside = false);

// Feature block as a dense (feature_width x n) matrix.
template <typename T>
diff::Tensor<T> feature_matrix(const SourceInput& input, const FeatureSpec& spec);

// (spec.total() x n) input matrix: gathered word embeddings over the one-hot
// block.
template <typename T>
diff::Var embed_with_features(diff::Graph<T>& g, diff::Parameter<T>& table, const SourceInput& input,
                              const FeatureSpec& spec);

// Reads "token v1 ... vd" lines into the rows of `table` for tokens present
// in `vocab`. Returns the number of rows filled.
template <typename T>
std::size_t load_pretrained_embeddings(const std::string& path, const corpus::Vocabulary& vocab,
                                       diff::Parameter<T>& table);

}  // namespace qapg::model
