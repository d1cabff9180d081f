#include "qapg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace qapg::config {

namespace {

const std::vector<VariantInfo> kVariants = {
    {Variant::QG, "QG", false, AnswerSource::None},
    {Variant::QG_F, "QG+F", true, AnswerSource::None},
    {Variant::QG_F_NE, "QG+F+NE", true, AnswerSource::NeSelector},
    {Variant::QG_GAE, "QG+GAE", false, AnswerSource::GroundTruth},
    {Variant::QG_F_AES, "QG+F+AES", true, AnswerSource::SequencePointer},
    {Variant::QG_F_AEB, "QG+F+AEB", true, AnswerSource::BoundaryPointer},
    {Variant::QG_F_GAE, "QG+F+GAE", true, AnswerSource::GroundTruth},
};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return value;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename N>
Field number(const char* section, const char* key, N ExperimentConfig::*member) {
  return {section, key,
          [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<N>(k, v);
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<N>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field text(const char* section, const char* key, std::string ExperimentConfig::*member) {
  return {section, key, [member](ExperimentConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      text("experiment", "name", &C::name),
      {"experiment", "variant",
       [](C& c, const std::string&, const std::string& v) { c.variant = parse_variant(v); },
       [](const C& c) { return std::string(to_string(c.variant)); }},
      number("experiment", "seed", &C::seed),
      text("data", "train", &C::train_path),
      text("data", "valid", &C::valid_path),
      text("data", "test", &C::test_path),
      text("data", "embeddings", &C::embeddings_path),
      number("data", "max_vocab", &C::max_vocab),
      number("data", "max_source_length", &C::max_source_length),
      number("data", "max_question_length", &C::max_question_length),
      number("model", "word_dim", &C::word_dim),
      number("model", "hidden_size", &C::hidden_size),
      number("model", "encoder_layers", &C::encoder_layers),
      number("model", "decoder_layers", &C::decoder_layers),
      number("model", "dropout", &C::dropout),
      number("model", "init_range", &C::init_range),
      number("train", "epochs", &C::epochs),
      number("train", "batch_size", &C::batch_size),
      number("train", "lr", &C::lr),
      number("train", "lr_decay", &C::lr_decay),
      number("train", "lr_decay_start_epoch", &C::lr_decay_start_epoch),
      {"train", "lr_decay_mode",
       [](C& c, const std::string& k, const std::string& v) {
         if (v != "every" && v != "once") throw ConfigError("config key '" + k + "' must be 'every' or 'once'");
         c.lr_decay_every_epoch = v == "every";
       },
       [](const C& c) { return std::string(c.lr_decay_every_epoch ? "every" : "once"); }},
      number("train", "clip_norm", &C::clip_norm),
      number("train", "stop_at_train_ppl", &C::stop_at_train_ppl),
      number("answer", "pointer_hidden", &C::pointer_hidden),
      number("answer", "pointer_attention", &C::pointer_attention),
      number("answer", "pointer_step_cap", &C::pointer_step_cap),
      number("answer", "ne_hidden", &C::ne_hidden),
      number("answer", "ne_layers", &C::ne_layers),
      number("answer", "ne_mlp_hidden", &C::ne_mlp_hidden),
      number("generate", "beam", &C::beam),
      number("generate", "max_length", &C::max_output_length),
  };
  return table;
}

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ConfigError("config key '" + key + "' " + rule);
}

}  // namespace

const std::vector<VariantInfo>& variant_table() { return kVariants; }

const VariantInfo& variant_info(Variant v) {
  for (const auto& info : kVariants) {
    if (info.variant == v) return info;
  }
  throw ContractViolation("unknown variant");
}

Variant parse_variant(std::string_view name) {
  for (const auto& info : kVariants) {
    if (name == info.name) return info.variant;
  }
  std::string known;
  for (const auto& info : kVariants) known += std::string(known.empty() ? "" : ", ") + info.name;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected one of " + known + ")");
}

const char* to_string(Variant v) { return variant_info(v).name; }

const char* to_string(AnswerSource a) {
  switch (a) {
    case AnswerSource::None: return "none";
    case AnswerSource::NeSelector: return "ne";
    case AnswerSource::SequencePointer: return "sequence";
    case AnswerSource::BoundaryPointer: return "boundary";
    case AnswerSource::GroundTruth: return "gold";
  }
  return "?";
}

diff::LrSchedule ExperimentConfig::lr_schedule() const {
  diff::LrSchedule s;
  s.base = lr;
  s.decay = lr_decay;
  s.start_epoch = lr_decay_start_epoch;
  s.repeat = lr_decay_every_epoch;
  return s;
}

void ExperimentConfig::validate() const {
  for (auto [v, key] : {std::pair{word_dim, "model.word_dim"}, {hidden_size, "model.hidden_size"},
                        {encoder_layers, "model.encoder_layers"}, {decoder_layers, "model.decoder_layers"},
                        {epochs, "train.epochs"}, {batch_size, "train.batch_size"},
                        {max_source_length, "data.max_source_length"},
                        {max_question_length, "data.max_question_length"}, {pointer_hidden, "answer.pointer_hidden"},
                        {pointer_attention, "answer.pointer_attention"}, {pointer_step_cap, "answer.pointer_step_cap"},
                        {ne_hidden, "answer.ne_hidden"}, {ne_layers, "answer.ne_layers"}, {beam, "generate.beam"},
                        {max_output_length, "generate.max_length"}}) {
    require(v > 0, key, "must be positive");
  }
  require(max_vocab == 0 || max_vocab > 4, "data.max_vocab", "must be 0 (uncapped) or larger than 4");
  require(dropout >= 0.0 && dropout < 1.0, "model.dropout", "must be in [0, 1)");
  require(init_range > 0.0, "model.init_range", "must be positive");
  require(lr > 0.0, "train.lr", "must be positive");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "train.lr_decay", "must be in (0, 1]");
  require(clip_norm > 0.0, "train.clip_norm", "must be positive");
  require(stop_at_train_ppl == 0.0 || stop_at_train_ppl > 1.0, "train.stop_at_train_ppl",
          "must be 0 (off) or greater than 1");
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(*this) + '\n';
  }
  return out;
}

std::uint64_t ExperimentConfig::fingerprint() const { return fnv1a64(canonical_text()); }

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message(), e.line(), 1);
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' is outside any [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const Field* field = nullptr;
      for (const auto& f : fields()) {
        if (section == f.section && key == f.key) field = &f;
      }
      if (!field) throw ConfigError("unknown config key '" + full + "'");
      field->set(c, full, value.data());
    }
  }
  c.validate();
  return c;
}

void set_value(ExperimentConfig& cfg, std::string_view dotted_key, const std::string& value) {
  for (const auto& f : fields()) {
    if (dotted_key == std::string(f.section) + "." + f.key) {
      f.set(cfg, std::string(dotted_key), value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(dotted_key) + "'");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace qapg::config
