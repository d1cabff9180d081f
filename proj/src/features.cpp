#include "qapg/features.hpp"

#include <fstream>
#include <sstream>

#include "qapg/errors.hpp"

namespace qapg::model {

using corpus::Vocabulary;

std::size_t channel_width(const Vocabulary& vocab) {
  return vocab.size() - Vocabulary::kNumSpecials + 1;
}

FeatureSpec FeatureSpec::from_vocabularies(std::size_t word_dim, const corpus::CorpusVocabularies& vocabs,
                                           bool features, bool bio) {
  FeatureSpec spec;
  spec.word_dim = word_dim;
  if (features) {
    spec.pos_width = channel_width(vocabs.pos);
    spec.ner_width = channel_width(vocabs.ner);
    spec.dep_width = channel_width(vocabs.dep);
  }
  spec.bio = bio;
  return spec;
}

FeatureWarnings& FeatureWarnings::operator+=(const FeatureWarnings& o) {
  unknown_pos += o.unknown_pos;
  unknown_ner += o.unknown_ner;
  unknown_dep += o.unknown_dep;
  return *this;
}

namespace {

std::uint32_t tag_column(const Vocabulary& vocab, const std::string& tag, std::size_t width,
                         std::size_t* unknown) {
  const auto id = vocab.id(tag);
  if (id < static_cast<std::int32_t>(Vocabulary::kNumSpecials)) {
    if (unknown) ++*unknown;
    return 0;
  }
  const auto col = static_cast<std::uint32_t>(id) - static_cast<std::uint32_t>(Vocabulary::kNumSpecials) + 1;
  if (col >= width) {
    throw ContractViolation("feature vocabulary larger than its one-hot block (" + tag + ")");
  }
  return col;
}

}  // namespace

SourceInput encode_source(const std::vector<corpus::TaggedToken>& tokens, const FeatureSpec& spec,
                          const corpus::CorpusVocabularies& vocabs, FeatureWarnings* warnings,
                          bool force_outside) {
  SourceInput out;
  out.words.reserve(tokens.size());
  out.active.reserve(tokens.size());
  FeatureWarnings local;
  for (const auto& tok : tokens) {
    out.words.push_back(vocabs.words.id(tok.word));
    std::vector<std::uint32_t> cols;
    std::uint32_t offset = 0;
    if (spec.pos_width > 0) {
      cols.push_back(offset + tag_column(vocabs.pos, tok.pos, spec.pos_width, &local.unknown_pos));
      offset += static_cast<std::uint32_t>(spec.pos_width);
    }
    if (spec.ner_width > 0) {
      cols.push_back(offset + tag_column(vocabs.ner, tok.ner, spec.ner_width, &local.unknown_ner));
      offset += static_cast<std::uint32_t>(spec.ner_width);
    }
    if (spec.dep_width > 0) {
      cols.push_back(offset + tag_column(vocabs.dep, tok.dep, spec.dep_width, &local.unknown_dep));
      offset += static_cast<std::uint32_t>(spec.dep_width);
    }
    if (spec.bio) {
      const auto tag = force_outside ? corpus::Bio::O : tok.bio;
      cols.push_back(offset + static_cast<std::uint32_t>(tag));
    }
    out.active.push_back(std::move(cols));
  }
  if (warnings) *warnings += local;
  return out;
}

template <typename T>
diff::Tensor<T> feature_matrix(const SourceInput& input, const FeatureSpec& spec) {
  diff::Tensor<T> m(spec.feature_width(), input.size());
  for (std::size_t t = 0; t < input.size(); ++t) {
    for (auto col : input.active[t]) {
      if (col >= m.rows()) throw ContractViolation("feature column outside the feature block");
      m(col, t) = T(1);
    }
  }
  return m;
}

template <typename T>
diff::Var embed_with_features(diff::Graph<T>& g, diff::Parameter<T>& table, const SourceInput& input,
                              const FeatureSpec& spec) {
  if (input.size() == 0) throw ContractViolation("embed_with_features: empty sentence");
  if (table.value.cols() != spec.word_dim) {
    throw ContractViolation("embed_with_features: " + table.name + " width does not match word_dim");
  }
  const diff::Var words = g.gather(table, input.words);
  if (spec.feature_width() == 0) return words;
  return g.concat({words, g.constant(feature_matrix<T>(input, spec))});
}

template <typename T>
std::size_t load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                       diff::Parameter<T>& table) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path);
  std::size_t filled = 0;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    for (double v; ss >> v;) values.push_back(v);
    if (!ss.eof()) throw ParseError("non-numeric embedding value", line_number, values.size() + 2);
    if (values.size() != table.value.cols()) {
      throw ParseError("embedding has " + std::to_string(values.size()) + " dims, expected " +
                           std::to_string(table.value.cols()),
                       line_number, 1);
    }
    if (!vocab.contains(token)) continue;
    const auto row = static_cast<std::size_t>(vocab.id(token));
    for (std::size_t j = 0; j < values.size(); ++j) table.value(row, j) = static_cast<T>(values[j]);
    ++filled;
  }
  return filled;
}

template diff::Tensor<float> feature_matrix(const SourceInput&, const FeatureSpec&);
template diff::Tensor<double> feature_matrix(const SourceInput&, const FeatureSpec&);
template diff::Var embed_with_features(diff::Graph<float>&, diff::Parameter<float>&, const SourceInput&,
                                       const FeatureSpec&);
template diff::Var embed_with_features(diff::Graph<double>&, diff::Parameter<double>&, const SourceInput&,
                                       const FeatureSpec&);
template std::size_t load_pretrained_embeddings(const std::string&, const Vocabulary&, diff::Parameter<float>&);
template std::size_t load_pretrained_embeddings(const std::string&, const Vocabulary&, diff::Parameter<double>&);

}  // namespace qapg::model
