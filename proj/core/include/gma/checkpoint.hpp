#pragma once

#include <string>

#include "gma/data.hpp"
#include "gma/model.hpp"

namespace gma {

// Self-contained snapshot: architecture, both vocabularies, and all weights.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;

  Model to_model() &&;
};

// Binary layout (all integers little-endian): 8-byte magic, u32 version,
// u64-length JSON header (config + vocab token lists), u64 parameter count,
// then per parameter name, dims, and raw f64 data in a fixed enumeration
// order. Saving the same model twice yields identical bytes.
void save_checkpoint(const std::string& path, const Model& model,
                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gma
