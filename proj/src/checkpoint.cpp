#include "qapg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qapg/errors.hpp"

namespace qapg::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void raw(void* p, std::size_t n) {
    if (n > bytes_.size() - pos_) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > bytes_.size() - pos_) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void write_vocab(Writer& w, const corpus::Vocabulary& v) {
  const auto& tokens = v.tokens();
  w.u32(static_cast<std::uint32_t>(tokens.size() - corpus::Vocabulary::kNumSpecials));
  for (std::size_t i = corpus::Vocabulary::kNumSpecials; i < tokens.size(); ++i) w.str(tokens[i]);
}

corpus::Vocabulary read_vocab(Reader& r) {
  const auto n = r.u32();
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(r.str());
  return corpus::Vocabulary::from_tokens(tokens);
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Qg: return "qg";
    case ModelKind::BoundaryPointer: return "boundary";
    case ModelKind::SequencePointer: return "sequence";
    case ModelKind::NeSelector: return "ne";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::Qg, ModelKind::BoundaryPointer, ModelKind::SequencePointer, ModelKind::NeSelector}) {
    if (name == to_string(k)) return k;
  }
  throw DataError("unknown model kind '" + std::string(name) + "' (expected qg, boundary, sequence or ne)");
}

std::string serialize(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  w.u64(ckpt.fingerprint());
  w.str(to_string(ckpt.kind));
  w.str(ckpt.config.canonical_text());
  for (const auto* v : {&ckpt.vocabs.words, &ckpt.vocabs.pos, &ckpt.vocabs.ner, &ckpt.vocabs.dep}) write_vocab(w, *v);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    w.raw(t.data(), t.size() * sizeof(float));
  }
  return w.take();
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a qapairgen checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kFormatVersion) {
    throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kFormatVersion) + ")");
  }
  const auto fp = r.u64();
  Checkpoint ckpt;
  ckpt.kind = parse_model_kind(r.str());
  ckpt.config = config::parse_config(r.str());
  if (ckpt.fingerprint() != fp) {
    throw DataError("checkpoint config fingerprint mismatch: header " + config::fingerprint_hex(fp) + ", config " +
                    config::fingerprint_hex(ckpt.fingerprint()));
  }
  ckpt.vocabs.words = read_vocab(r);
  ckpt.vocabs.pos = read_vocab(r);
  ckpt.vocabs.ner = read_vocab(r);
  ckpt.vocabs.dep = read_vocab(r);
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    const auto rows = r.u32();
    const auto cols = r.u32();
    diff::Tensor<float> t(rows, cols);
    r.raw(t.data(), t.size() * sizeof(float));
    if (!ckpt.tensors.emplace(std::move(name), std::move(t)).second) throw DataError("checkpoint repeats a tensor");
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

void save(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  const auto bytes = serialize(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void store_params(Checkpoint& ckpt, const diff::ParamSet<float>& params) {
  ckpt.tensors.clear();
  for (const auto& [name, p] : params) ckpt.tensors.emplace(name, p.value);
}

void load_params(const Checkpoint& ckpt, diff::ParamSet<float>& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw DataError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  }
  for (auto& [name, p] : params) {
    const auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw DataError("checkpoint lacks tensor " + name);
    if (it->second.shape() != p.value.shape()) {
      throw DataError("checkpoint tensor " + name + " has shape " + diff::to_string(it->second.shape()) +
                      ", model expects " + diff::to_string(p.value.shape()));
    }
    p.value = it->second;
  }
}

}  // namespace qapg::checkpoint
