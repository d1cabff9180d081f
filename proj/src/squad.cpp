#include <cctype>

#include <nlohmann/json.hpp>

#include "qapg/corpus.hpp"
#include "qapg/errors.hpp"

namespace qapg::corpus {

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

const json& require(const json& node, const char* key) {
  if (!node.is_object() || !node.contains(key)) {
    throw DataError(std::string("SQuAD document missing field '") + key + "'");
  }
  return node.at(key);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view context) {
  std::vector<std::pair<std::size_t, std::size_t>> sentences;
  std::size_t begin = 0;
  while (begin < context.size() && std::isspace(static_cast<unsigned char>(context[begin]))) {
    ++begin;
  }
  for (std::size_t i = begin; i < context.size(); ++i) {
    const char c = context[i];
    if ((c == '.' || c == '?' || c == '!') && i + 1 < context.size() &&
        std::isspace(static_cast<unsigned char>(context[i + 1]))) {
      sentences.emplace_back(begin, i + 1);
      begin = i + 1;
      while (begin < context.size() && std::isspace(static_cast<unsigned char>(context[begin]))) {
        ++begin;
      }
      i = begin - 1;
    }
  }
  auto end = context.size();
  while (end > begin && std::isspace(static_cast<unsigned char>(context[end - 1]))) --end;
  if (end > begin) sentences.emplace_back(begin, end);
  return sentences;
}

SquadParseResult parse_squad(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string("malformed SQuAD JSON: ") + e.what(), line, column);
  }

  SquadParseResult result;
  std::size_t counter = 0;
  for (const auto& article : require(doc, "data")) {
    for (const auto& paragraph : require(article, "paragraphs")) {
      const auto context = require(paragraph, "context").get<std::string>();
      const auto sentences = split_sentences(context);
      for (const auto& qa : require(paragraph, "qas")) {
        ++counter;
        const auto& answers = require(qa, "answers");
        if (!answers.is_array() || answers.empty()) {
          ++result.skipped.no_answer;
          continue;
        }
        const auto& first = answers.front();
        const auto text = require(first, "text").get<std::string>();
        const auto start_raw = require(first, "answer_start").get<long long>();
        if (start_raw < 0 || static_cast<std::size_t>(start_raw) + text.size() > context.size()) {
          ++result.skipped.offset_outside_context;
          continue;
        }
        const auto start = static_cast<std::size_t>(start_raw);
        // The sentence owning the answer: the last one beginning at or before it.
        const std::pair<std::size_t, std::size_t>* owner = nullptr;
        for (const auto& s : sentences) {
          if (s.first <= start) owner = &s;
        }
        if (owner == nullptr || start + text.size() > owner->second) {
          ++result.skipped.answer_crosses_sentence;
          continue;
        }
        SquadRecord record;
        record.id = qa.contains("id") && qa.at("id").is_string() ? qa.at("id").get<std::string>()
                                                                 : "q" + std::to_string(counter);
        record.sentence = context.substr(owner->first, owner->second - owner->first);
        record.question = require(qa, "question").get<std::string>();
        record.answer = text;
        record.answer_offset = start - owner->first;
        result.records.push_back(std::move(record));
      }
    }
  }
  return result;
}

}  // namespace qapg::corpus
