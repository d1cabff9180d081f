#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qapg::corpus {

enum class Bio : std::uint8_t { B, I, O };

char bio_char(Bio tag);
Bio bio_from_string(std::string_view s);

struct TaggedToken {
  std::string word;
  std::string pos;
  std::string ner = "O";
  std::string dep;
  Bio bio = Bio::O;

  bool operator==(const TaggedToken&) const = default;
};

// 1-based inclusive token span.
struct AnswerSpan {
  std::size_t start = 1;
  std::size_t end = 1;

  std::size_t length() const { return end - start + 1; }
  bool valid_for(std::size_t sentence_length) const {
    return start >= 1 && start <= end && end <= sentence_length;
  }
  bool operator==(const AnswerSpan&) const = default;
};

std::string format_span(const std::optional<AnswerSpan>& span);
std::optional<AnswerSpan> parse_span(std::string_view text);

struct Example {
  std::vector<TaggedToken> sentence;
  std::vector<std::string> question;
  std::optional<AnswerSpan> answer;
  std::string source_id;

  std::vector<std::string> words() const;
  bool operator==(const Example&) const = default;
};

// ---- SQuAD ingest ---------------------------------------------------------

struct SquadRecord {
  std::string id;
  std::string sentence;
  std::string question;
  std::string answer;
  std::size_t answer_offset = 0;  // byte offset of the answer inside `sentence`
};

struct SkipReport {
  std::size_t offset_outside_context = 0;
  std::size_t answer_crosses_sentence = 0;
  std::size_t no_answer = 0;

  std::size_t total() const {
    return offset_outside_context + answer_crosses_sentence + no_answer;
  }
};

struct SquadParseResult {
  std::vector<SquadRecord> records;
  SkipReport skipped;
};

// Throws ParseError (with line/column of the JSON error) on malformed input.
SquadParseResult parse_squad(std::string_view json_text);

// Sentence boundaries of `context` as [begin, end) byte ranges. A sentence
// ends after [.?!] when followed by whitespace.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view context);

// ---- tokenization and answer encoding -------------------------------------

inline constexpr std::string_view kPipeToken = "<pipe>";

std::vector<std::string> tokenize(std::string_view text);

std::optional<AnswerSpan> locate_answer(const std::vector<std::string>& sentence,
                                        const std::vector<std::string>& answer);

std::vector<Bio> encode_bio(std::size_t length, const std::optional<AnswerSpan>& span);

// Inverse of encode_bio for well-formed tag sequences (at most one B run).
// Throws DataError when the tags do not describe a single span.
std::optional<AnswerSpan> decode_bio(const std::vector<Bio>& tags);

void apply_bio(std::vector<TaggedToken>& tokens, const std::optional<AnswerSpan>& span);

// ---- tagged corpus format -------------------------------------------------

// word|POS|NER|DEP|BIO tokens joined by single spaces.
std::vector<TaggedToken> parse_tagged_line(std::string_view line, std::size_t line_number = 1);
std::string format_tagged_line(const std::vector<TaggedToken>& tokens);

// Full corpus line: tagged tokens TAB question TAB span.
Example parse_corpus_line(std::string_view line, std::size_t line_number = 1);
std::string format_corpus_line(const Example& example);

struct CorpusReadResult {
  std::vector<Example> examples;
  std::vector<std::string> comments;  // header lines starting with '#'
};

CorpusReadResult read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<Example>& examples);

// ---- vocabularies ---------------------------------------------------------

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kBos = 2;
  static constexpr std::int32_t kEos = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocabulary();

  // Tokens in id order after the specials. Duplicates or special names are
  // rejected.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return token_of_.size(); }
  const std::vector<std::string>& tokens() const { return token_of_; }

  std::vector<std::int32_t> encode(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const { return token_of_ == other.token_of_; }

 private:
  void add(const std::string& token);

  std::map<std::string, std::int32_t, std::less<>> id_of_;
  std::vector<std::string> token_of_;
};

// max_size == 0 means uncapped. Otherwise max_size >= 4.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& streams,
                       std::size_t max_size = 0);

struct CorpusVocabularies {
  Vocabulary words;
  Vocabulary pos;
  Vocabulary ner;
  Vocabulary dep;
};

// Word vocabulary from sentences and questions (capped); feature
// vocabularies uncapped.
CorpusVocabularies build_corpus_vocabularies(const std::vector<Example>& examples,
                                             std::size_t max_words);

}  // namespace qapg::corpus
