#pragma once

// Internal JSON helpers shared by the config and checkpoint translation
// units; not installed.

#include <string>

#include <json.hpp>

#include "gma/model.hpp"

namespace gma::detail {

void reject_unknown_keys(const nlohmann::json& obj,
                         std::initializer_list<const char*> allowed,
                         const std::string& where);

int req_int(const nlohmann::json& obj, const char* key, const std::string& where);
int opt_int(const nlohmann::json& obj, const char* key, int def, const std::string& where);
double opt_double(const nlohmann::json& obj, const char* key, double def,
                  const std::string& where);
bool opt_bool(const nlohmann::json& obj, const char* key, bool def,
              const std::string& where);
std::string opt_string(const nlohmann::json& obj, const char* key,
                       const std::string& def, const std::string& where);
std::uint64_t opt_u64(const nlohmann::json& obj, const char* key, std::uint64_t def,
                      const std::string& where);

nlohmann::json gma_config_to_json(const GmaConfig& cfg);
GmaConfig gma_config_from_json(const nlohmann::json& obj, const std::string& where);

// require_vocab: checkpoints carry vocab sizes, run configs must not.
nlohmann::json model_config_to_json(const ModelConfig& cfg, bool with_vocab);
ModelConfig model_config_from_json(const nlohmann::json& obj, bool require_vocab,
                                   const std::string& where);

}  // namespace gma::detail
