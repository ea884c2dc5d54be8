#include "gma/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "config_json.hpp"

namespace gma {
namespace detail {

void reject_unknown_keys(const nlohmann::json& obj,
                         std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!obj.is_object())
    throw std::runtime_error(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
    if (!ok.count(item.key()))
      throw std::runtime_error(where + ": unknown key '" + item.key() + "'");
}

namespace {

const nlohmann::json* find(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

[[noreturn]] void bad_type(const char* key, const char* want, const std::string& where) {
  throw std::runtime_error(where + ": key '" + key + "' must be " + want);
}

}  // namespace

int req_int(const nlohmann::json& obj, const char* key, const std::string& where) {
  const nlohmann::json* v = find(obj, key);
  if (!v) throw std::runtime_error(where + ": missing key '" + key + "'");
  if (!v->is_number_integer()) bad_type(key, "an integer", where);
  return v->get<int>();
}

int opt_int(const nlohmann::json& obj, const char* key, int def, const std::string& where) {
  const nlohmann::json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number_integer()) bad_type(key, "an integer", where);
  return v->get<int>();
}

double opt_double(const nlohmann::json& obj, const char* key, double def,
                  const std::string& where) {
  const nlohmann::json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number()) bad_type(key, "a number", where);
  return v->get<double>();
}

bool opt_bool(const nlohmann::json& obj, const char* key, bool def, const std::string& where) {
  const nlohmann::json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_boolean()) bad_type(key, "a boolean", where);
  return v->get<bool>();
}

std::string opt_string(const nlohmann::json& obj, const char* key, const std::string& def,
                       const std::string& where) {
  const nlohmann::json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_string()) bad_type(key, "a string", where);
  return v->get<std::string>();
}

std::uint64_t opt_u64(const nlohmann::json& obj, const char* key, std::uint64_t def,
                      const std::string& where) {
  const nlohmann::json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number_integer() || (v->is_number_integer() && v->get<std::int64_t>() < 0))
    bad_type(key, "a non-negative integer", where);
  return v->get<std::uint64_t>();
}

nlohmann::json gma_config_to_json(const GmaConfig& cfg) {
  return nlohmann::json{{"delta", cfg.delta},
                        {"prior", to_string(cfg.prior_variant)},
                        {"sigma", to_string(cfg.sigma_mode)},
                        {"sharing", to_string(cfg.sharing_mode)},
                        {"position", to_string(cfg.position_mode)}};
}

GmaConfig gma_config_from_json(const nlohmann::json& obj, const std::string& where) {
  reject_unknown_keys(obj, {"delta", "prior", "sigma", "sharing", "position"}, where);
  GmaConfig cfg;
  cfg.delta = opt_double(obj, "delta", cfg.delta, where);
  try {
    cfg.prior_variant =
        prior_variant_from_string(opt_string(obj, "prior", to_string(cfg.prior_variant), where));
    cfg.sigma_mode =
        sigma_mode_from_string(opt_string(obj, "sigma", to_string(cfg.sigma_mode), where));
    cfg.sharing_mode =
        sharing_mode_from_string(opt_string(obj, "sharing", to_string(cfg.sharing_mode), where));
    cfg.position_mode = position_mode_from_string(
        opt_string(obj, "position", to_string(cfg.position_mode), where));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg, bool with_vocab) {
  nlohmann::json j{{"d_model", cfg.d_model},
                   {"d_k", cfg.d_k},
                   {"d_ff", cfg.d_ff},
                   {"layers", cfg.layers},
                   {"heads", cfg.heads},
                   {"max_positions", cfg.max_positions},
                   {"dropout", cfg.dropout},
                   {"seed", cfg.seed},
                   {"encoder_causal", cfg.encoder_causal},
                   {"gma", gma_config_to_json(cfg.gma)}};
  if (with_vocab) {
    j["src_vocab"] = cfg.src_vocab;
    j["tgt_vocab"] = cfg.tgt_vocab;
  }
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& obj, bool require_vocab,
                                   const std::string& where) {
  std::initializer_list<const char*> base = {
      "d_model", "d_k", "d_ff", "layers", "heads", "max_positions",
      "dropout", "seed", "encoder_causal", "gma"};
  std::initializer_list<const char*> with_vocab = {
      "d_model", "d_k", "d_ff", "layers", "heads", "max_positions",
      "dropout", "seed", "encoder_causal", "gma", "src_vocab", "tgt_vocab"};
  reject_unknown_keys(obj, require_vocab ? with_vocab : base, where);
  ModelConfig cfg;
  if (require_vocab) {
    cfg.src_vocab = req_int(obj, "src_vocab", where);
    cfg.tgt_vocab = req_int(obj, "tgt_vocab", where);
  }
  cfg.d_model = opt_int(obj, "d_model", cfg.d_model, where);
  cfg.d_k = opt_int(obj, "d_k", cfg.d_k, where);
  cfg.d_ff = opt_int(obj, "d_ff", cfg.d_ff, where);
  cfg.layers = opt_int(obj, "layers", cfg.layers, where);
  cfg.heads = opt_int(obj, "heads", cfg.heads, where);
  cfg.max_positions = opt_int(obj, "max_positions", cfg.max_positions, where);
  cfg.dropout = opt_double(obj, "dropout", cfg.dropout, where);
  cfg.seed = opt_u64(obj, "seed", cfg.seed, where);
  cfg.encoder_causal = opt_bool(obj, "encoder_causal", cfg.encoder_causal, where);
  if (const auto* g = find(obj, "gma")) cfg.gma = gma_config_from_json(*g, where + ".gma");
  return cfg;
}

}  // namespace detail

void DataSpec::validate() const {
  if (synthetic) {
    if (min_len < 1 || max_len < min_len)
      throw std::invalid_argument("data: need 1 <= min_len <= max_len");
    if (train_count < 1) throw std::invalid_argument("data: train count must be >= 1");
    if (dev_count < 0 || test_count < 0)
      throw std::invalid_argument("data: dev/test counts must be >= 0");
    if (vocab < 1) throw std::invalid_argument("data: vocab must be >= 1");
  } else {
    if (train_src.empty() || train_tgt.empty())
      throw std::invalid_argument("data: corpus files need train_src and train_tgt");
    if (dev_src.empty() != dev_tgt.empty())
      throw std::invalid_argument("data: dev corpus needs both sides");
    if (min_freq < 1) throw std::invalid_argument("data: min_freq must be >= 1");
  }
}

namespace {

TrainOptions train_from_json(const nlohmann::json& obj, const std::string& where) {
  gma::detail::reject_unknown_keys(
      obj,
      {"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps", "clip_norm",
       "dev_eval_size", "seed"},
      where);
  TrainOptions t;
  t.epochs = detail::opt_int(obj, "epochs", t.epochs, where);
  t.batch_size = detail::opt_int(obj, "batch_size", t.batch_size, where);
  t.lr = detail::opt_double(obj, "lr", t.lr, where);
  t.beta1 = detail::opt_double(obj, "beta1", t.beta1, where);
  t.beta2 = detail::opt_double(obj, "beta2", t.beta2, where);
  t.adam_eps = detail::opt_double(obj, "adam_eps", t.adam_eps, where);
  t.clip_norm = detail::opt_double(obj, "clip_norm", t.clip_norm, where);
  t.dev_eval_size = detail::opt_int(obj, "dev_eval_size", t.dev_eval_size, where);
  t.seed = detail::opt_u64(obj, "seed", t.seed, where);
  return t;
}

DataSpec data_from_json(const nlohmann::json& obj, const std::string& where) {
  gma::detail::reject_unknown_keys(
      obj,
      {"task", "param", "vocab", "min_len", "max_len", "train", "dev", "test", "seed",
       "train_src", "train_tgt", "dev_src", "dev_tgt", "min_freq"},
      where);
  DataSpec d;
  bool has_task = obj.contains("task");
  bool has_files = obj.contains("train_src") || obj.contains("train_tgt");
  if (has_task && has_files)
    throw std::runtime_error(where + ": choose a synthetic task or corpus files, not both");
  if (has_task) {
    d.synthetic = true;
    try {
      d.task = synthetic_task_from_string(
          detail::opt_string(obj, "task", to_string(d.task), where));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    d.param = detail::opt_int(obj, "param", d.param, where);
    d.vocab = detail::opt_int(obj, "vocab", d.vocab, where);
    d.min_len = detail::opt_int(obj, "min_len", d.min_len, where);
    d.max_len = detail::opt_int(obj, "max_len", d.max_len, where);
    d.train_count = detail::opt_int(obj, "train", d.train_count, where);
    d.dev_count = detail::opt_int(obj, "dev", d.dev_count, where);
    d.test_count = detail::opt_int(obj, "test", d.test_count, where);
    d.seed = detail::opt_u64(obj, "seed", d.seed, where);
  } else if (has_files) {
    d.synthetic = false;
    d.train_src = detail::opt_string(obj, "train_src", "", where);
    d.train_tgt = detail::opt_string(obj, "train_tgt", "", where);
    d.dev_src = detail::opt_string(obj, "dev_src", "", where);
    d.dev_tgt = detail::opt_string(obj, "dev_tgt", "", where);
    d.min_freq = detail::opt_int(obj, "min_freq", d.min_freq, where);
  } else {
    throw std::runtime_error(where + ": needs a synthetic 'task' or corpus files");
  }
  d.validate();
  return d;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(name + ": " + e.what());
  }
  detail::reject_unknown_keys(doc, {"model", "train", "data", "out_dir"}, name);
  RunConfig cfg;
  if (doc.contains("model"))
    cfg.model = detail::model_config_from_json(doc["model"], /*require_vocab=*/false,
                                               name + ".model");
  if (doc.contains("train")) cfg.train = train_from_json(doc["train"], name + ".train");
  if (doc.contains("data")) cfg.data = data_from_json(doc["data"], name + ".data");
  else cfg.data.validate();
  cfg.out_dir = detail::opt_string(doc, "out_dir", cfg.out_dir, name);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string run_config_to_json_string(const RunConfig& cfg) {
  nlohmann::json data;
  if (cfg.data.synthetic) {
    data = nlohmann::json{{"task", to_string(cfg.data.task)},
                          {"param", cfg.data.param},
                          {"vocab", cfg.data.vocab},
                          {"min_len", cfg.data.min_len},
                          {"max_len", cfg.data.max_len},
                          {"train", cfg.data.train_count},
                          {"dev", cfg.data.dev_count},
                          {"test", cfg.data.test_count},
                          {"seed", cfg.data.seed}};
  } else {
    data = nlohmann::json{{"train_src", cfg.data.train_src},
                          {"train_tgt", cfg.data.train_tgt},
                          {"min_freq", cfg.data.min_freq}};
    if (!cfg.data.dev_src.empty()) {
      data["dev_src"] = cfg.data.dev_src;
      data["dev_tgt"] = cfg.data.dev_tgt;
    }
  }
  nlohmann::json j{
      {"model", detail::model_config_to_json(cfg.model, /*with_vocab=*/false)},
      {"train",
       nlohmann::json{{"epochs", cfg.train.epochs},
                      {"batch_size", cfg.train.batch_size},
                      {"lr", cfg.train.lr},
                      {"beta1", cfg.train.beta1},
                      {"beta2", cfg.train.beta2},
                      {"adam_eps", cfg.train.adam_eps},
                      {"clip_norm", cfg.train.clip_norm},
                      {"dev_eval_size", cfg.train.dev_eval_size},
                      {"seed", cfg.train.seed}}},
      {"data", data},
      {"out_dir", cfg.out_dir}};
  return j.dump(2);
}

}  // namespace gma
