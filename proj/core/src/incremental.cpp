#include <cmath>
#include <stdexcept>

#include "gma/model.hpp"

namespace gma {

IncrementalDecoder::IncrementalDecoder(const Model& model, double delta_override)
    : model_(model),
      delta_(std::isnan(delta_override) ? model.config().gma.delta : delta_override) {
  if (!(delta_ >= 0.0))
    throw std::invalid_argument("incremental: delta must be >= 0");
  const ModelConfig& cfg = model.config();
  int n = track_count(cfg.gma.sharing_mode, cfg.layers, cfg.heads);
  track_g_.resize(static_cast<std::size_t>(n));
  track_p_.resize(static_cast<std::size_t>(n));
}

void IncrementalDecoder::push_source(int token_id) {
  if (complete_)
    throw std::logic_error("incremental: push after source completion");
  src_.push_back(token_id);
  z_stale_ = true;
}

void IncrementalDecoder::mark_source_complete() { complete_ = true; }

StepOutcome IncrementalDecoder::propose() {
  StepOutcome out;
  if (src_.empty()) {
    if (complete_) throw std::runtime_error("incremental: completed source is empty");
    out.wait = true;
    out.required_g = 1;
    return out;
  }
  NoGradGuard guard;
  if (z_stale_) {
    z_ = model_.encode(src_);
    z_stale_ = false;
  }
  std::vector<int> dec_in;
  dec_in.reserve(written_.size() + 1);
  dec_in.push_back(Vocabulary::kBos);
  dec_in.insert(dec_in.end(), written_.begin(), written_.end());

  DecodePass pass = model_.decode_pass(z_, dec_in, track_g_, complete_, delta_,
                                       /*capture_attn=*/false);
  std::size_t last = dec_in.size() - 1;
  out.required_g = pass.required_g[last];
  if (!complete_ && out.required_g > received()) {
    out.wait = true;
    return out;
  }
  out.write_g = std::min(out.required_g, received());
  int v = pass.logits.dim(1);
  const auto& lv = pass.logits.values();
  out.logits.assign(lv.begin() + static_cast<std::ptrdiff_t>(last) * v,
                    lv.begin() + static_cast<std::ptrdiff_t>(last + 1) * v);
  out.track_bounds.reserve(pass.alignment.tracks.size());
  out.track_p.reserve(pass.alignment.tracks.size());
  for (const auto& track : pass.alignment.tracks) {
    out.track_bounds.push_back(track.g[last]);
    out.track_p.push_back(track.p[last]);
  }
  return out;
}

void IncrementalDecoder::commit(int token_id, const StepOutcome& outcome) {
  if (outcome.wait) throw std::logic_error("incremental: commit of a wait step");
  if (outcome.track_bounds.size() != track_g_.size())
    throw std::logic_error("incremental: outcome does not match this decoder");
  if (token_id < 0 || token_id >= model_.config().tgt_vocab)
    throw std::invalid_argument("incremental: token id out of range");
  written_.push_back(token_id);
  g_.push_back(outcome.write_g);
  for (std::size_t t = 0; t < track_g_.size(); ++t) {
    track_g_[t].push_back(outcome.track_bounds[t]);
    track_p_[t].push_back(outcome.track_p[t]);
  }
}

}  // namespace gma
