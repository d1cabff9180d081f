#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "qapg/errors.hpp"
#include "qapg/optim.hpp"

namespace qapg::config {

// Inconsistent or out-of-range configuration; raised before any training.
class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

enum class Variant { QG, QG_F, QG_F_NE, QG_GAE, QG_F_AES, QG_F_AEB, QG_F_GAE };

enum class AnswerSource { None, NeSelector, SequencePointer, BoundaryPointer, GroundTruth };

struct VariantInfo {
  Variant variant;
  const char* name;
  bool features;  // POS/NER/DEP channels
  AnswerSource answer;
};

// The seven systems, in the order they are usually reported.
const std::vector<VariantInfo>& variant_table();
const VariantInfo& variant_info(Variant v);
Variant parse_variant(std::string_view name);
const char* to_string(Variant v);
const char* to_string(AnswerSource a);

struct ExperimentConfig {
  // [experiment]
  std::string name = "desk";
  Variant variant = Variant::QG_F_GAE;
  std::uint64_t seed = 13;

  // [data]
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string embeddings_path;  // optional pretrained word vectors
  std::size_t max_vocab = 0;    // 0: uncapped
  std::size_t max_source_length = 100;
  std::size_t max_question_length = 30;

  // [model]
  std::size_t word_dim = 32;
  std::size_t hidden_size = 64;
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;
  double dropout = 0.0;
  double init_range = 0.1;

  // [train]
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 0.002;
  double lr_decay = 0.5;
  std::size_t lr_decay_start_epoch = 10;
  bool lr_decay_every_epoch = true;  // lr_decay_mode = every | once
  double clip_norm = 5.0;
  double stop_at_train_ppl = 0.0;

  // [answer]
  std::size_t pointer_hidden = 64;
  std::size_t pointer_attention = 64;
  std::size_t pointer_step_cap = 10;
  std::size_t ne_hidden = 64;
  std::size_t ne_layers = 2;
  std::size_t ne_mlp_hidden = 0;

  // [generate]
  std::size_t beam = 3;
  std::size_t max_output_length = 30;

  const VariantInfo& info() const { return variant_info(variant); }
  diff::LrSchedule lr_schedule() const;

  // Throws ConfigError naming the offending key.
  void validate() const;

  // Every key in a fixed order; parse(canonical_text()) reproduces the config.
  std::string canonical_text() const;
  std::uint64_t fingerprint() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// INI text with [section] headers. Unknown keys are rejected; missing keys
// keep their defaults. The result is validated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Sets "section.key" from its text form (as in the INI file). Does not
// validate; call validate() after the last override.
void set_value(ExperimentConfig& cfg, std::string_view dotted_key, const std::string& value);

std::uint64_t fnv1a64(std::string_view bytes);
std::string fingerprint_hex(std::uint64_t fp);

}  // namespace qapg::config
