#include "qapg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "qapg/errors.hpp"

namespace qapg::corpus {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split(std::string_view text, char delim) {
  std::vector<std::string_view> parts;
  std::size_t begin = 0;
  while (true) {
    const auto pos = text.find(delim, begin);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(begin));
      return parts;
    }
    parts.push_back(text.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

const std::vector<std::string> kSpecials = {"<pad>", "<unk>", "<s>", "</s>"};

}  // namespace

char bio_char(Bio tag) {
  switch (tag) {
    case Bio::B:
      return 'B';
    case Bio::I:
      return 'I';
    case Bio::O:
      return 'O';
  }
  return 'O';
}

Bio bio_from_string(std::string_view s) {
  if (s == "B") return Bio::B;
  if (s == "I") return Bio::I;
  if (s == "O") return Bio::O;
  throw DataError("invalid BIO tag '" + std::string(s) + "'");
}

std::string format_span(const std::optional<AnswerSpan>& span) {
  if (!span) return "-";
  return std::to_string(span->start) + "-" + std::to_string(span->end);
}

std::optional<AnswerSpan> parse_span(std::string_view text) {
  if (text == "-") return std::nullopt;
  const auto dash = text.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == text.size()) {
    throw DataError("invalid answer span '" + std::string(text) + "'");
  }
  auto to_index = [&](std::string_view digits) {
    if (!std::all_of(digits.begin(), digits.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw DataError("invalid answer span '" + std::string(text) + "'");
    }
    return static_cast<std::size_t>(std::stoull(std::string(digits)));
  };
  AnswerSpan span{to_index(text.substr(0, dash)), to_index(text.substr(dash + 1))};
  if (span.start < 1 || span.start > span.end) {
    throw DataError("invalid answer span '" + std::string(text) + "'");
  }
  return span;
}

std::vector<std::string> Example::words() const {
  std::vector<std::string> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(t.word);
  return out;
}

// ---- tokenization ---------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (is_space(c)) {
      flush();
    } else if (c == '|') {
      flush();
      tokens.emplace_back(kPipeToken);
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    }
  }
  flush();
  return tokens;
}

std::optional<AnswerSpan> locate_answer(const std::vector<std::string>& sentence,
                                        const std::vector<std::string>& answer) {
  if (answer.empty() || answer.size() > sentence.size()) return std::nullopt;
  const auto it = std::search(sentence.begin(), sentence.end(), answer.begin(), answer.end());
  if (it == sentence.end()) return std::nullopt;
  const auto start = static_cast<std::size_t>(it - sentence.begin()) + 1;
  return AnswerSpan{start, start + answer.size() - 1};
}

std::vector<Bio> encode_bio(std::size_t length, const std::optional<AnswerSpan>& span) {
  std::vector<Bio> tags(length, Bio::O);
  if (!span) return tags;
  if (!span->valid_for(length)) {
    throw ContractViolation("answer span " + format_span(span) +
                            " invalid for sentence length " + std::to_string(length));
  }
  tags[span->start - 1] = Bio::B;
  for (auto i = span->start; i < span->end; ++i) tags[i] = Bio::I;
  return tags;
}

std::optional<AnswerSpan> decode_bio(const std::vector<Bio>& tags) {
  std::optional<AnswerSpan> span;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case Bio::B:
        if (span) throw DataError("BIO tags describe more than one span");
        span = AnswerSpan{i + 1, i + 1};
        break;
      case Bio::I:
        if (!span || span->end != i) throw DataError("BIO tag I without preceding B or I");
        span->end = i + 1;
        break;
      case Bio::O:
        break;
    }
  }
  return span;
}

void apply_bio(std::vector<TaggedToken>& tokens, const std::optional<AnswerSpan>& span) {
  const auto tags = encode_bio(tokens.size(), span);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i].bio = tags[i];
}

// ---- tagged format --------------------------------------------------------

std::vector<TaggedToken> parse_tagged_line(std::string_view line, std::size_t line_number) {
  std::vector<TaggedToken> tokens;
  std::size_t column = 0;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && is_space(line[pos])) ++pos;
    if (pos == line.size()) break;
    auto end = pos;
    while (end < line.size() && !is_space(line[end])) ++end;
    ++column;
    const auto field = line.substr(pos, end - pos);
    const auto parts = split(field, '|');
    if (parts.size() != 5) {
      throw ParseError("expected 5 '|'-separated parts in '" + std::string(field) + "', got " +
                           std::to_string(parts.size()),
                       line_number, column);
    }
    if (parts[0].empty()) throw ParseError("empty word", line_number, column);
    TaggedToken token{std::string(parts[0]), std::string(parts[1]), std::string(parts[2]),
                      std::string(parts[3]), Bio::O};
    try {
      token.bio = bio_from_string(parts[4]);
    } catch (const DataError& e) {
      throw ParseError(e.what(), line_number, column);
    }
    if (token.bio == Bio::I && (tokens.empty() || tokens.back().bio == Bio::O)) {
      throw ParseError("BIO tag I must follow B or I", line_number, column);
    }
    tokens.push_back(std::move(token));
    pos = end;
  }
  return tokens;
}

std::string format_tagged_line(const std::vector<TaggedToken>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (i) out.push_back(' ');
    out += t.word;
    out.push_back('|');
    out += t.pos;
    out.push_back('|');
    out += t.ner;
    out.push_back('|');
    out += t.dep;
    out.push_back('|');
    out.push_back(bio_char(t.bio));
  }
  return out;
}

Example parse_corpus_line(std::string_view line, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto columns = split(line, '\t');
  if (columns.size() != 3) {
    throw ParseError("expected 3 tab-separated columns, got " + std::to_string(columns.size()),
                     line_number, 1);
  }
  Example ex;
  ex.sentence = parse_tagged_line(columns[0], line_number);
  if (ex.sentence.empty()) throw ParseError("empty sentence", line_number, 1);
  std::istringstream question{std::string(columns[1])};
  for (std::string w; question >> w;) ex.question.push_back(w);
  try {
    ex.answer = parse_span(columns[2]);
  } catch (const DataError& e) {
    throw ParseError(e.what(), line_number, 3);
  }
  std::vector<Bio> tags;
  tags.reserve(ex.sentence.size());
  for (const auto& t : ex.sentence) tags.push_back(t.bio);
  if (ex.answer && !ex.answer->valid_for(ex.sentence.size())) {
    throw ParseError("answer span exceeds sentence length", line_number, 3);
  }
  if (tags != encode_bio(ex.sentence.size(), ex.answer)) {
    throw ParseError("answer span inconsistent with BIO tags", line_number, 3);
  }
  ex.source_id = std::to_string(line_number);
  return ex;
}

std::string format_corpus_line(const Example& example) {
  std::string out = format_tagged_line(example.sentence);
  out.push_back('\t');
  for (std::size_t i = 0; i < example.question.size(); ++i) {
    if (i) out.push_back(' ');
    out += example.question[i];
  }
  out.push_back('\t');
  out += format_span(example.answer);
  return out;
}

CorpusReadResult read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  CorpusReadResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line.front() == '#') {
      result.comments.push_back(line);
      continue;
    }
    auto ex = parse_corpus_line(line, line_number);
    ex.source_id = path + ":" + std::to_string(line_number);
    result.examples.push_back(std::move(ex));
  }
  return result;
}

void write_corpus(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& ex : examples) out << format_corpus_line(ex) << '\n';
}

// ---- vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const auto& s : kSpecials) add(s);
}

void Vocabulary::add(const std::string& token) {
  if (id_of_.count(token)) throw DataError("duplicate vocabulary token '" + token + "'");
  id_of_.emplace(token, static_cast<std::int32_t>(token_of_.size()));
  token_of_.push_back(token);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  const auto it = id_of_.find(token);
  return it == id_of_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= token_of_.size()) return token_of_[kUnk];
  return token_of_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return id_of_.find(token) != id_of_.end(); }

std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& t : token_of_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < kNumSpecials ||
      !std::equal(kSpecials.begin(), kSpecials.end(), lines.begin())) {
    throw DataError("vocabulary file must start with <pad>, <unk>, <s>, </s>: " + path);
  }
  return from_tokens({lines.begin() + kNumSpecials, lines.end()});
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& streams, std::size_t max_size) {
  if (max_size != 0 && max_size < Vocabulary::kNumSpecials) {
    throw ContractViolation("vocabulary max_size must be >= 4");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& stream : streams) {
    for (const auto& t : stream) {
      if (std::find(kSpecials.begin(), kSpecials.end(), t) == kSpecials.end()) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_size != 0 && ranked.size() > max_size - Vocabulary::kNumSpecials) {
    ranked.resize(max_size - Vocabulary::kNumSpecials);
  }
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [t, c] : ranked) tokens.push_back(t);
  return Vocabulary::from_tokens(tokens);
}

CorpusVocabularies build_corpus_vocabularies(const std::vector<Example>& examples,
                                             std::size_t max_words) {
  std::vector<std::vector<std::string>> words, pos, ner, dep;
  for (const auto& ex : examples) {
    std::vector<std::string> w, p, n, d;
    for (const auto& t : ex.sentence) {
      w.push_back(t.word);
      p.push_back(t.pos);
      n.push_back(t.ner);
      d.push_back(t.dep);
    }
    words.push_back(std::move(w));
    words.push_back(ex.question);
    pos.push_back(std::move(p));
    ner.push_back(std::move(n));
    dep.push_back(std::move(d));
  }
  return {build_vocab(words, max_words), build_vocab(pos), build_vocab(ner), build_vocab(dep)};
}

}  // namespace qapg::corpus
