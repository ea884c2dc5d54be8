#include "gma/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "config_json.hpp"

namespace gma {

namespace {

constexpr char kMagic[8] = {'G', 'M', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Reader {
  const std::string& buf;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    off += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(off, n);
    off += n;
    return s;
  }
};

nlohmann::json vocab_tokens(const Vocabulary& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = Vocabulary::kSpecials; i < v.size(); ++i) arr.push_back(v.token(i));
  return arr;
}

Vocabulary vocab_from_json(const nlohmann::json& arr, const char* which) {
  if (!arr.is_array())
    throw std::runtime_error(std::string("checkpoint: ") + which + " must be an array");
  std::vector<std::string> tokens;
  for (const auto& t : arr) {
    if (!t.is_string())
      throw std::runtime_error(std::string("checkpoint: ") + which + " entries must be strings");
    tokens.push_back(t.get<std::string>());
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

}  // namespace

Model Checkpoint::to_model() && {
  return Model(std::move(config), std::move(params));
}

void save_checkpoint(const std::string& path, const Model& model,
                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  const ModelConfig& cfg = model.config();
  if (src_vocab.size() != cfg.src_vocab || tgt_vocab.size() != cfg.tgt_vocab)
    throw std::invalid_argument("checkpoint: vocabulary sizes do not match the model");

  nlohmann::json header;
  header["config"] = detail::model_config_to_json(cfg, /*with_vocab=*/true);
  header["src_vocab"] = vocab_tokens(src_vocab);
  header["tgt_vocab"] = vocab_tokens(tgt_vocab);
  std::string json_text = header.dump();

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u64(out, json_text.size());
  out += json_text;

  // Tensor copies share storage, so this visits the live weights.
  ModelParams params = model.params();
  std::uint64_t count = 0;
  params.visit([&count](const std::string&, Tensor&) { ++count; });
  put_u64(out, count);
  params.visit([&out](const std::string& name, Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<std::uint32_t>(t.dim(i)));
    for (double v : t.values()) put_f64(out, v);
  });

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string buf = ss.str();

  Reader r{buf};
  std::string magic = r.bytes(sizeof(kMagic));
  if (magic != std::string(kMagic, sizeof(kMagic)))
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  std::uint64_t json_len = r.u64();
  std::string json_text = r.bytes(json_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint: bad header json: " + std::string(e.what()));
  }
  if (!header.is_object() || !header.contains("config") ||
      !header.contains("src_vocab") || !header.contains("tgt_vocab"))
    throw std::runtime_error("checkpoint: incomplete header");

  Checkpoint ck;
  ck.config = detail::model_config_from_json(header["config"], /*require_vocab=*/true,
                                             "checkpoint config");
  ck.src_vocab = vocab_from_json(header["src_vocab"], "src_vocab");
  ck.tgt_vocab = vocab_from_json(header["tgt_vocab"], "tgt_vocab");
  if (ck.src_vocab.size() != ck.config.src_vocab ||
      ck.tgt_vocab.size() != ck.config.tgt_vocab)
    throw std::runtime_error("checkpoint: vocab lists do not match config sizes");

  Rng rng(ck.config.seed);
  ck.params = ModelParams::init(ck.config, rng);

  std::uint64_t expected = 0;
  ck.params.visit([&expected](const std::string&, Tensor&) { ++expected; });
  std::uint64_t count = r.u64();
  if (count != expected)
    throw std::runtime_error("checkpoint: parameter count mismatch");

  // Parameters are stored in visit order; read them back in lockstep.
  ck.params.visit([&r](const std::string& name, Tensor& t) {
    std::uint32_t name_len = r.u32();
    std::string stored = r.bytes(name_len);
    if (stored != name)
      throw std::runtime_error("checkpoint: expected parameter '" + name + "', found '" +
                               stored + "'");
    std::uint32_t ndim = r.u32();
    if (static_cast<int>(ndim) != t.ndim())
      throw std::runtime_error("checkpoint: rank mismatch for '" + name + "'");
    for (int i = 0; i < t.ndim(); ++i)
      if (static_cast<int>(r.u32()) != t.dim(i))
        throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    for (auto& v : t.values()) v = r.f64();
  });
  if (r.off != buf.size())
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return ck;
}

}  // namespace gma
