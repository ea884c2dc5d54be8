#include "gma/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace gma {

void ModelConfig::validate() const {
  if (src_vocab <= Vocabulary::kSpecials || tgt_vocab <= Vocabulary::kSpecials)
    throw std::invalid_argument("model config: vocab sizes must exceed the specials");
  if (d_model < 1 || d_ff < 1) throw std::invalid_argument("model config: bad width");
  if (layers < 1 || heads < 1)
    throw std::invalid_argument("model config: layers and heads must be >= 1");
  if (d_k == 0 && d_model % heads != 0)
    throw std::invalid_argument("model config: d_model must divide into heads");
  if (d_k < 0) throw std::invalid_argument("model config: d_k must be >= 0");
  if (max_positions < 2) throw std::invalid_argument("model config: max_positions too small");
  if (!(dropout >= 0.0) || dropout >= 1.0)
    throw std::invalid_argument("model config: dropout must be in [0, 1)");
  gma.validate();
}

namespace {

std::vector<double> uniform_values(Rng& rng, std::size_t n, double r) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-r, r);
  return v;
}

Tensor xavier(Rng& rng, int rows, int cols) {
  double r = std::sqrt(6.0 / (rows + cols));
  return Tensor::param({rows, cols},
                       uniform_values(rng, static_cast<std::size_t>(rows) * cols, r));
}

Tensor ones_vec(int n) { return Tensor::param({n}, std::vector<double>(n, 1.0)); }
Tensor zeros_vec(int n) { return Tensor::param({n}, std::vector<double>(n, 0.0)); }

AttentionHeadParams init_head(Rng& rng, int d_model, int d_k) {
  AttentionHeadParams h;
  h.wq = xavier(rng, d_model, d_k);
  h.wk = xavier(rng, d_model, d_k);
  h.wv = xavier(rng, d_model, d_k);
  h.wo = xavier(rng, d_k, d_model);
  return h;
}

// Small output heads keep the initial increments near exp(0) = 1 and the
// predicted widths near 1.
PredictorParams init_predictor(Rng& rng, int d_model, bool predicted_sigma) {
  PredictorParams p;
  p.w = xavier(rng, d_model, d_model);
  p.v = Tensor::param({d_model, 1}, uniform_values(rng, d_model, 0.05));
  if (predicted_sigma)
    p.u = Tensor::param({d_model, 1}, uniform_values(rng, d_model, 0.05));
  return p;
}

Tensor sinusoidal_rows(int n, int d) {
  std::vector<double> v(static_cast<std::size_t>(n) * d);
  for (int pos = 0; pos < n; ++pos)
    for (int j = 0; j < d; ++j) {
      double rate = std::pow(10000.0, -2.0 * (j / 2) / d);
      double a = pos * rate;
      v[static_cast<std::size_t>(pos) * d + j] = (j % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  return Tensor::from_values({n, d}, std::move(v));
}

Tensor causal_mask(int n) {
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) v[static_cast<std::size_t>(i) * n + j] = 1.0;
  return Tensor::from_values({n, n}, std::move(v));
}

Tensor multi_head(const Tensor& queries_in, const Tensor& keys_in,
                  const std::vector<AttentionHeadParams>& heads, bool causal) {
  Tensor mask;
  if (causal) mask = causal_mask(queries_in.dim(0));
  Tensor out;
  for (const auto& h : heads) {
    Tensor q = matmul(queries_in, h.wq);
    Tensor k = matmul(keys_in, h.wk);
    Tensor v = matmul(keys_in, h.wv);
    Tensor alpha = causal ? soft_attention_masked(q, k, mask) : soft_attention(q, k);
    Tensor ctx = matmul(matmul(alpha, v), h.wo);
    out = out.defined() ? add(out, ctx) : ctx;
  }
  return out;
}

Tensor ffn_block(const Tensor& x, const Tensor& w1, const Tensor& b1,
                 const Tensor& w2, const Tensor& b2) {
  return add(matmul(relu(add(matmul(x, w1), b1)), w2), b2);
}

Tensor maybe_dropout(const Tensor& t, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return t;
  return dropout(t, rate, *rng);
}

void check_ids(const std::vector<int>& ids, int vocab, const char* what) {
  for (int id : ids)
    if (id < 0 || id >= vocab)
      throw std::invalid_argument(std::string(what) + ": token id out of range");
}

// First global track whose predictor lives on this layer.
int first_owned_track(SharingMode mode, int layers, int heads, int layer) {
  return track_index(mode, layers, heads, layer, 0);
}

struct TrackBounds {
  std::vector<int> attn;  // support bound used by the attention masks
  std::vector<int> raw;   // unclamped policy bound, may exceed received source
};

TrackBounds track_bounds(const std::vector<double>& p,
                         const std::vector<int>& committed, double delta,
                         int available) {
  TrackBounds b;
  b.attn.resize(p.size());
  b.raw.resize(p.size());
  int prev_attn = 1, prev_raw = 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    int attn, raw;
    if (i < committed.size()) {
      attn = committed[i];
      raw = committed[i];
      if (attn < 1 || attn > available)
        throw std::invalid_argument("decode: committed bound outside the received source");
    } else {
      if (!(p[i] >= 1.0)) throw std::runtime_error("decode: aligned position < 1");
      double r = std::floor(p[i] + delta);
      if (r < 1.0) r = 1.0;
      if (r > 1073741824.0) r = 1073741824.0;  // keep the int cast in range
      raw = std::max(static_cast<int>(r), prev_raw);
      attn = std::max(std::min(raw, available), prev_attn);
    }
    b.attn[i] = attn;
    b.raw[i] = raw;
    prev_attn = attn;
    prev_raw = raw;
  }
  return b;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  int d = cfg.d_model;
  int dk = cfg.head_dim();
  ModelParams p;
  double emb_r = std::sqrt(3.0 / d);
  p.src_embed = Tensor::param(
      {cfg.src_vocab, d}, uniform_values(rng, static_cast<std::size_t>(cfg.src_vocab) * d, emb_r));
  p.tgt_embed = Tensor::param(
      {cfg.tgt_vocab, d}, uniform_values(rng, static_cast<std::size_t>(cfg.tgt_vocab) * d, emb_r));
  for (int l = 0; l < cfg.layers; ++l) {
    EncoderLayerParams e;
    e.ln1_g = ones_vec(d); e.ln1_b = zeros_vec(d);
    e.ln2_g = ones_vec(d); e.ln2_b = zeros_vec(d);
    for (int h = 0; h < cfg.heads; ++h) e.self_heads.push_back(init_head(rng, d, dk));
    e.ffn_w1 = xavier(rng, d, cfg.d_ff);
    e.ffn_b1 = zeros_vec(cfg.d_ff);
    e.ffn_w2 = xavier(rng, cfg.d_ff, d);
    e.ffn_b2 = zeros_vec(d);
    p.encoder.push_back(std::move(e));
  }
  p.enc_final_ln_g = ones_vec(d);
  p.enc_final_ln_b = zeros_vec(d);
  bool predicted = cfg.gma.sigma_mode == SigmaMode::predicted;
  for (int l = 0; l < cfg.layers; ++l) {
    DecoderLayerParams dl;
    dl.ln1_g = ones_vec(d); dl.ln1_b = zeros_vec(d);
    dl.ln2_g = ones_vec(d); dl.ln2_b = zeros_vec(d);
    dl.ln3_g = ones_vec(d); dl.ln3_b = zeros_vec(d);
    for (int h = 0; h < cfg.heads; ++h) dl.self_heads.push_back(init_head(rng, d, dk));
    for (int h = 0; h < cfg.heads; ++h) dl.cross_heads.push_back(init_head(rng, d, dk));
    int owned = tracks_owned_by_layer(cfg.gma.sharing_mode, cfg.layers, cfg.heads, l);
    for (int t = 0; t < owned; ++t) dl.predictors.push_back(init_predictor(rng, d, predicted));
    dl.ffn_w1 = xavier(rng, d, cfg.d_ff);
    dl.ffn_b1 = zeros_vec(cfg.d_ff);
    dl.ffn_w2 = xavier(rng, cfg.d_ff, d);
    dl.ffn_b2 = zeros_vec(d);
    p.decoder.push_back(std::move(dl));
  }
  p.final_ln_g = ones_vec(d);
  p.final_ln_b = zeros_vec(d);
  p.out_proj = xavier(rng, d, cfg.tgt_vocab);
  p.out_bias = zeros_vec(cfg.tgt_vocab);
  return p;
}

void ModelParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
  auto head_group = [&fn](const std::string& prefix, std::vector<AttentionHeadParams>& hs) {
    for (std::size_t h = 0; h < hs.size(); ++h) {
      std::string base = prefix + "." + std::to_string(h) + ".";
      fn(base + "wq", hs[h].wq);
      fn(base + "wk", hs[h].wk);
      fn(base + "wv", hs[h].wv);
      fn(base + "wo", hs[h].wo);
    }
  };
  fn("src_embed", src_embed);
  fn("tgt_embed", tgt_embed);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    std::string base = "enc." + std::to_string(l) + ".";
    auto& e = encoder[l];
    fn(base + "ln1.g", e.ln1_g);
    fn(base + "ln1.b", e.ln1_b);
    head_group(base + "self", e.self_heads);
    fn(base + "ln2.g", e.ln2_g);
    fn(base + "ln2.b", e.ln2_b);
    fn(base + "ffn.w1", e.ffn_w1);
    fn(base + "ffn.b1", e.ffn_b1);
    fn(base + "ffn.w2", e.ffn_w2);
    fn(base + "ffn.b2", e.ffn_b2);
  }
  fn("enc.final_ln.g", enc_final_ln_g);
  fn("enc.final_ln.b", enc_final_ln_b);
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    std::string base = "dec." + std::to_string(l) + ".";
    auto& dl = decoder[l];
    fn(base + "ln1.g", dl.ln1_g);
    fn(base + "ln1.b", dl.ln1_b);
    head_group(base + "self", dl.self_heads);
    fn(base + "ln2.g", dl.ln2_g);
    fn(base + "ln2.b", dl.ln2_b);
    head_group(base + "cross", dl.cross_heads);
    for (std::size_t t = 0; t < dl.predictors.size(); ++t) {
      std::string pb = base + "pred." + std::to_string(t) + ".";
      fn(pb + "w", dl.predictors[t].w);
      fn(pb + "v", dl.predictors[t].v);
      if (dl.predictors[t].u.defined()) fn(pb + "u", dl.predictors[t].u);
    }
    fn(base + "ln3.g", dl.ln3_g);
    fn(base + "ln3.b", dl.ln3_b);
    fn(base + "ffn.w1", dl.ffn_w1);
    fn(base + "ffn.b1", dl.ffn_b1);
    fn(base + "ffn.w2", dl.ffn_w2);
    fn(base + "ffn.b2", dl.ffn_b2);
  }
  fn("final_ln.g", final_ln_g);
  fn("final_ln.b", final_ln_b);
  fn("out_proj", out_proj);
  fn("out_bias", out_bias);
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit([&out](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

void ModelParams::zero_grads() {
  visit([](const std::string&, Tensor& t) { t.zero_grad(); });
}

Model::Model(ModelConfig cfg, ModelParams params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

Model Model::init(ModelConfig cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelParams p = ModelParams::init(cfg, rng);
  return Model(std::move(cfg), std::move(p));
}

namespace {

Tensor embed_sequence(const Tensor& table, const std::vector<int>& ids, int d_model) {
  Tensor emb = scale(embedding_rows(table, ids), std::sqrt(static_cast<double>(d_model)));
  return add(emb, sinusoidal_rows(static_cast<int>(ids.size()), d_model));
}

}  // namespace

Tensor Model::encode(const std::vector<int>& src_ids) const {
  return encode_impl(src_ids, nullptr);
}

Tensor Model::encode_impl(const std::vector<int>& src_ids, Rng* dropout_rng) const {
  if (src_ids.empty()) throw std::invalid_argument("encode: empty source");
  if (static_cast<int>(src_ids.size()) > cfg_.max_positions)
    throw std::invalid_argument("encode: source longer than max_positions");
  check_ids(src_ids, cfg_.src_vocab, "encode");
  double rate = cfg_.dropout;
  Tensor h = maybe_dropout(embed_sequence(params_.src_embed, src_ids, cfg_.d_model),
                           rate, dropout_rng);
  for (const auto& layer : params_.encoder) {
    Tensor a = layer_norm(h, layer.ln1_g, layer.ln1_b);
    h = add(h, maybe_dropout(multi_head(a, a, layer.self_heads, cfg_.encoder_causal),
                             rate, dropout_rng));
    Tensor f = layer_norm(h, layer.ln2_g, layer.ln2_b);
    h = add(h, maybe_dropout(ffn_block(f, layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2),
                             rate, dropout_rng));
  }
  return layer_norm(h, params_.enc_final_ln_g, params_.enc_final_ln_b);
}

DecodePass Model::decode_pass(const Tensor& z, const std::vector<int>& dec_ids,
                              const std::vector<std::vector<int>>& committed_track_g,
                              bool source_complete, double delta, bool capture_attn,
                              Rng* dropout_rng) const {
  if (!z.defined() || z.ndim() != 2 || z.dim(1) != cfg_.d_model)
    throw std::invalid_argument("decode: bad encoder output shape");
  if (dec_ids.empty()) throw std::invalid_argument("decode: empty decoder input");
  if (static_cast<int>(dec_ids.size()) > cfg_.max_positions)
    throw std::invalid_argument("decode: target longer than max_positions");
  check_ids(dec_ids, cfg_.tgt_vocab, "decode");
  if (!(delta >= 0.0)) throw std::invalid_argument("decode: delta must be >= 0");

  int available = z.dim(0);
  int T = static_cast<int>(dec_ids.size());
  int L = cfg_.layers, H = cfg_.heads;
  SharingMode sharing = cfg_.gma.sharing_mode;
  int n_tracks = track_count(sharing, L, H);
  if (!committed_track_g.empty() &&
      static_cast<int>(committed_track_g.size()) != n_tracks)
    throw std::invalid_argument("decode: committed bounds do not match track count");
  for (const auto& c : committed_track_g)
    if (static_cast<int>(c.size()) > T)
      throw std::invalid_argument("decode: more committed bounds than decoder steps");

  double rate = cfg_.dropout;
  Tensor h = maybe_dropout(embed_sequence(params_.tgt_embed, dec_ids, cfg_.d_model),
                           rate, dropout_rng);

  DecodePass out;
  if (capture_attn) {
    out.attn.layers = L;
    out.attn.heads = H;
    out.attn.rows = T;
    out.attn.cols = available;
    out.attn.alpha.resize(static_cast<std::size_t>(L) * H);
    out.attn.prior.resize(static_cast<std::size_t>(L) * H);
    out.attn.beta.resize(static_cast<std::size_t>(L) * H);
  }
  std::vector<Tensor> track_p(n_tracks), track_sigma(n_tracks);
  std::vector<TrackBounds> bounds(n_tracks);
  out.alignment.tracks.resize(n_tracks);
  out.alignment.source_len = available;
  bool shared_across_heads =
      sharing == SharingMode::share_heads || sharing == SharingMode::share_all;

  for (int l = 0; l < L; ++l) {
    const auto& dl = params_.decoder[l];
    Tensor s_in = h;  // layer input drives this layer's position predictors

    int owned = tracks_owned_by_layer(sharing, L, H, l);
    int base = owned > 0 ? first_owned_track(sharing, L, H, l) : 0;
    for (int o = 0; o < owned; ++o) {
      int t = base + o;
      const auto& pred = dl.predictors[static_cast<std::size_t>(o)];
      Tensor hidden = tanh(matmul(s_in, pred.w));
      Tensor head = matmul(hidden, pred.v);  // [T x 1]
      Tensor p;
      std::vector<double> deltas(static_cast<std::size_t>(T));
      if (cfg_.gma.position_mode == PositionMode::incremental) {
        Tensor inc = exp(head);
        p = aligned_positions(inc);
        deltas = inc.values();
      } else {
        p = absolute_positions(head);
        double prev = 1.0;
        for (int i = 0; i < T; ++i) {
          deltas[static_cast<std::size_t>(i)] = p.values()[static_cast<std::size_t>(i)] - prev;
          prev = p.values()[static_cast<std::size_t>(i)];
        }
      }
      Tensor sigma;
      switch (cfg_.gma.sigma_mode) {
        case SigmaMode::half: sigma = scale(p, 0.5); break;
        case SigmaMode::full: sigma = p; break;
        case SigmaMode::third: sigma = scale(p, 1.0 / 3.0); break;
        case SigmaMode::predicted: sigma = exp(matmul(hidden, pred.u)); break;
      }
      track_p[t] = p;
      track_sigma[t] = sigma;
      const std::vector<int> no_committed;
      bounds[t] = track_bounds(
          p.values(), committed_track_g.empty() ? no_committed : committed_track_g[t],
          delta, available);
      auto& rec = out.alignment.tracks[t];
      rec.layer = l;
      rec.head = shared_across_heads ? -1 : o;
      rec.delta_p = std::move(deltas);
      rec.p = p.values();
      rec.sigma = sigma.values();
      rec.g = bounds[t].attn;
    }

    Tensor a = layer_norm(h, dl.ln1_g, dl.ln1_b);
    h = add(h, maybe_dropout(multi_head(a, a, dl.self_heads, true), rate, dropout_rng));

    Tensor c = layer_norm(h, dl.ln2_g, dl.ln2_b);
    Tensor cross;
    for (int hh = 0; hh < H; ++hh) {
      const auto& hp = dl.cross_heads[static_cast<std::size_t>(hh)];
      int t = track_index(sharing, L, H, l, hh);
      Tensor alpha = soft_attention(matmul(c, hp.wq), matmul(z, hp.wk));
      Tensor prior = prior_matrix(track_p[t], track_sigma[t], bounds[t].attn,
                                  cfg_.gma.prior_variant, available);
      Tensor beta = posterior_attention(alpha, prior);
      Tensor ctx = matmul(matmul(beta, matmul(z, hp.wv)), hp.wo);
      cross = cross.defined() ? add(cross, ctx) : ctx;
      if (capture_attn) {
        std::size_t slot = static_cast<std::size_t>(l) * H + hh;
        out.attn.alpha[slot] = alpha.values();
        out.attn.prior[slot] = prior.values();
        out.attn.beta[slot] = beta.values();
      }
    }
    h = add(h, maybe_dropout(cross, rate, dropout_rng));

    Tensor f = layer_norm(h, dl.ln3_g, dl.ln3_b);
    h = add(h, maybe_dropout(ffn_block(f, dl.ffn_w1, dl.ffn_b1, dl.ffn_w2, dl.ffn_b2),
                             rate, dropout_rng));
  }

  h = layer_norm(h, params_.final_ln_g, params_.final_ln_b);
  out.logits = add(matmul(h, params_.out_proj), params_.out_bias);

  std::vector<std::vector<int>> per_track_attn(bounds.size());
  for (std::size_t t = 0; t < bounds.size(); ++t) per_track_attn[t] = bounds[t].attn;
  out.alignment.g = combined_output_positions(per_track_attn, available);
  out.required_g.assign(static_cast<std::size_t>(T), 1);
  for (int i = 0; i < T; ++i) {
    int req = 1;
    for (const auto& b : bounds) req = std::max(req, b.raw[static_cast<std::size_t>(i)]);
    out.required_g[static_cast<std::size_t>(i)] = req;
  }
  if (source_complete)
    for (auto& r : out.required_g) r = std::min(r, available);
  return out;
}

TrainForward Model::decode_train(const std::vector<int>& src_ids,
                                 const std::vector<int>& tgt_ids, bool capture_attn,
                                 Rng* dropout_rng, double delta_override) const {
  check_ids(tgt_ids, cfg_.tgt_vocab, "decode");
  double delta = std::isnan(delta_override) ? cfg_.gma.delta : delta_override;
  Tensor z = encode_impl(src_ids, dropout_rng);
  std::vector<int> dec_in;
  dec_in.reserve(tgt_ids.size() + 1);
  dec_in.push_back(Vocabulary::kBos);
  dec_in.insert(dec_in.end(), tgt_ids.begin(), tgt_ids.end());
  std::vector<int> labels(tgt_ids);
  labels.push_back(Vocabulary::kEos);

  DecodePass pass =
      decode_pass(z, dec_in, {}, true, delta, capture_attn, dropout_rng);
  std::vector<std::uint8_t> mask(labels.size(), 1);
  TrainForward fwd;
  fwd.loss = cross_entropy(pass.logits, labels, mask);
  fwd.logits = pass.logits;
  fwd.alignment = std::move(pass.alignment);
  fwd.attn = std::move(pass.attn);
  return fwd;
}

}  // namespace gma
