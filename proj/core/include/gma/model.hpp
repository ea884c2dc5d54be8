#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gma/attention.hpp"
#include "gma/data.hpp"
#include "gma/ops.hpp"
#include "gma/rng.hpp"
#include "gma/tensor.hpp"

namespace gma {

// Desk-scale transformer for simultaneous translation. Every decoder layer
// uses monotonic position-predicting cross-attention; the encoder defaults
// to causal self-attention so that encoding a longer prefix never changes
// earlier states and incremental decoding reproduces teacher-forced results
// exactly.

struct ModelConfig {
  int src_vocab = 0;
  int tgt_vocab = 0;
  int d_model = 32;
  int d_k = 0;  // 0 -> d_model / heads
  int d_ff = 64;
  int layers = 2;  // encoder and decoder stack depth
  int heads = 2;
  int max_positions = 256;
  double dropout = 0.0;
  std::uint64_t seed = 1;
  bool encoder_causal = true;
  GmaConfig gma;

  int head_dim() const { return d_k > 0 ? d_k : d_model / heads; }
  void validate() const;
};

struct AttentionHeadParams {
  Tensor wq, wk, wv;  // [d_model x d_k]
  Tensor wo;          // [d_k x d_model]
};

struct PredictorParams {
  Tensor w;  // [d_model x d_model]
  Tensor v;  // [d_model x 1] increment head
  Tensor u;  // [d_model x 1] width head, only when sigma_mode == predicted
};

struct EncoderLayerParams {
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  std::vector<AttentionHeadParams> self_heads;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct DecoderLayerParams {
  Tensor ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
  std::vector<AttentionHeadParams> self_heads, cross_heads;
  std::vector<PredictorParams> predictors;  // tracks owned by this layer
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct ModelParams {
  Tensor src_embed, tgt_embed;
  std::vector<EncoderLayerParams> encoder;
  Tensor enc_final_ln_g, enc_final_ln_b;
  std::vector<DecoderLayerParams> decoder;
  Tensor final_ln_g, final_ln_b;
  Tensor out_proj;  // [d_model x tgt_vocab]
  Tensor out_bias;  // [tgt_vocab]

  static ModelParams init(const ModelConfig& cfg, Rng& rng);
  // Fixed enumeration order; the checkpoint layout and optimizer state
  // depend on it.
  void visit(const std::function<void(const std::string&, Tensor&)>& fn);
  std::vector<std::pair<std::string, Tensor>> named();
  void zero_grads();
};

struct DecodePass {
  Tensor logits;        // [T x tgt_vocab]
  AlignmentState alignment;
  AttentionMatrices attn;  // filled when captured
  std::vector<int> required_g;  // per step: unclamped bound the policy must meet
};

struct TrainForward {
  Tensor loss;
  Tensor logits;
  AlignmentState alignment;
  AttentionMatrices attn;
};

class Model {
 public:
  Model(ModelConfig cfg, ModelParams params);
  static Model init(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  // Encode src_ids (<eos> already appended by the data layer) -> [J x d].
  Tensor encode(const std::vector<int>& src_ids) const;

  // Unified decoder pass. dec_ids start with <bos>. committed_track_g pins
  // the attention bounds of already-written steps (empty for teacher
  // forcing); later steps derive bounds from the predicted positions,
  // clamped to `available` source rows once the source is complete.
  DecodePass decode_pass(const Tensor& z, const std::vector<int>& dec_ids,
                         const std::vector<std::vector<int>>& committed_track_g,
                         bool source_complete, double delta, bool capture_attn,
                         Rng* dropout_rng = nullptr) const;

  // Teacher-forced loss over one sentence; tgt_ids are content ids (framing
  // with <bos>/<eos> happens internally). delta_override NaN -> config value.
  TrainForward decode_train(
      const std::vector<int>& src_ids, const std::vector<int>& tgt_ids,
      bool capture_attn = false, Rng* dropout_rng = nullptr,
      double delta_override = std::numeric_limits<double>::quiet_NaN()) const;

 private:
  Tensor encode_impl(const std::vector<int>& src_ids, Rng* dropout_rng) const;

  ModelConfig cfg_;
  ModelParams params_;
};

// Step-wise greedy decoding against a growing source prefix.
struct StepOutcome {
  bool wait = false;
  int required_g = 0;            // source tokens needed before this write
  int write_g = 0;               // bound recorded if the token is written
  std::vector<double> logits;    // next-token scores (empty when waiting)
  std::vector<int> track_bounds; // per-track attention bound for this step
  std::vector<double> track_p;   // per-track aligned position
};

class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(
      const Model& model,
      double delta_override = std::numeric_limits<double>::quiet_NaN());

  void push_source(int token_id);
  void mark_source_complete();
  bool source_complete() const { return complete_; }
  int received() const { return static_cast<int>(src_.size()); }

  StepOutcome propose();
  void commit(int token_id, const StepOutcome& outcome);

  const std::vector<int>& written() const { return written_; }
  const std::vector<int>& committed_g() const { return g_; }
  const std::vector<std::vector<int>>& committed_track_g() const { return track_g_; }
  const std::vector<std::vector<double>>& committed_track_p() const { return track_p_; }

 private:
  const Model& model_;
  double delta_;
  std::vector<int> src_;
  bool complete_ = false;
  Tensor z_;
  bool z_stale_ = true;
  std::vector<int> written_;
  std::vector<int> g_;
  std::vector<std::vector<int>> track_g_;
  std::vector<std::vector<double>> track_p_;
};

// ---- training ----

struct TrainOptions {
  int epochs = 10;
  int batch_size = 16;
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // 0 disables clipping
  int dev_eval_size = 100; // sentences scored per epoch; 0 skips dev scoring
  std::uint64_t seed = 1;
};

struct EpochLog {
  int step = 0;       // optimizer steps so far
  double loss = 0.0;  // mean training loss of the epoch
  double dev_bleu = std::numeric_limits<double>::quiet_NaN();
  double dev_al = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochLog> log;
  double final_loss = 0.0;
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params);
  // grad_scale multiplies every gradient before the moment updates; the
  // training loop uses it for global-norm clipping.
  void step(double lr, double beta1, double beta2, double eps,
            double grad_scale = 1.0);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

// Grad L2 norm across parameters; tensors without gradients count as zero.
double global_grad_norm(const std::vector<Tensor>& params);

// Throws on divergence (non-finite loss). progress, when given, receives one
// line per epoch.
TrainResult train_model(Model& model, const ParallelCorpus& train_corpus,
                        const ParallelCorpus& dev_corpus,
                        const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                        const TrainOptions& opts, std::ostream* progress = nullptr);

// Teacher-forced token accuracy in percent (argmax vs. gold labels).
double token_accuracy(const Model& model, const ParallelCorpus& corpus,
                      const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

}  // namespace gma
