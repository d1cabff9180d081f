#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "qapg/config.hpp"
#include "qapg/corpus.hpp"
#include "qapg/tensor.hpp"

namespace qapg::checkpoint {

inline constexpr char kMagic[8] = {'Q', 'A', 'P', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;

// Which network the tensors belong to.
enum class ModelKind { Qg, BoundaryPointer, SequencePointer, NeSelector };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Layout (all integers little-endian):
//   magic[8] u32 version u64 fingerprint
//   str kind, str config text
//   4 vocabularies (words, pos, ner, dep): u32 count, then str tokens
//   u32 tensor count, then per tensor: str name, u32 rows, u32 cols, f32 values
// where str is u32 byte length + bytes. Tensors are written in name order.
struct Checkpoint {
  ModelKind kind = ModelKind::Qg;
  config::ExperimentConfig config;
  corpus::CorpusVocabularies vocabs;
  std::map<std::string, diff::Tensor<float>> tensors;

  std::uint64_t fingerprint() const { return config.fingerprint(); }
};

std::string serialize(const Checkpoint& ckpt);
// Throws DataError on a bad magic, version mismatch, fingerprint mismatch or
// truncation.
Checkpoint deserialize(const std::string& bytes);

void save(const std::string& path, const Checkpoint& ckpt);
Checkpoint load(const std::string& path);

// Copies between a checkpoint and a live parameter set; names and shapes
// must match exactly.
void store_params(Checkpoint& ckpt, const diff::ParamSet<float>& params);
void load_params(const Checkpoint& ckpt, diff::ParamSet<float>& params);

}  // namespace qapg::checkpoint
