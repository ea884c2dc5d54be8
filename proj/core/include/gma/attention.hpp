#pragma once

#include <string>
#include <vector>

#include "gma/ops.hpp"
#include "gma/tensor.hpp"

namespace gma {

// Monotonic cross-attention built from predicted source positions.
//
// Per target step i a small MLP predicts a positive increment from the
// previous target state; increments accumulate into an aligned source
// position p_i, and the integer write bound g(i) = floor(p_i + delta) says
// how much source must be available before token i may be emitted. Soft
// attention over the received prefix is reweighted by a density centered at
// p_i (truncated at g(i) and renormalized) and renormalized again, so the
// only learning signal into the position predictor flows through that
// density; the floor/clamp that makes g(i) is a hard mask with no gradient.

enum class PriorVariant { gaussian, laplace, linear, none };
enum class SigmaMode { half, full, third, predicted };
enum class SharingMode { all_independent, share_heads, share_layers, share_all };
enum class PositionMode { incremental, absolute };

std::string to_string(PriorVariant v);
std::string to_string(SigmaMode m);
std::string to_string(SharingMode m);
std::string to_string(PositionMode m);
PriorVariant prior_variant_from_string(const std::string& s);
SigmaMode sigma_mode_from_string(const std::string& s);
SharingMode sharing_mode_from_string(const std::string& s);
PositionMode position_mode_from_string(const std::string& s);

struct GmaConfig {
  double delta = 1.0;
  PriorVariant prior_variant = PriorVariant::gaussian;
  SigmaMode sigma_mode = SigmaMode::half;
  SharingMode sharing_mode = SharingMode::share_heads;
  PositionMode position_mode = PositionMode::incremental;

  void validate() const;
};

// ---- building blocks (autodiff-traced) ----

// softmax(q k^T / sqrt(d_k)); queries [I x d_k], keys [J x d_k] -> [I x J].
Tensor soft_attention(const Tensor& queries, const Tensor& keys);
// Same with a 0/1 support mask (padding, causal, or prefix truncation).
Tensor soft_attention_masked(const Tensor& queries, const Tensor& keys,
                             const Tensor& mask);

// exp(tanh(states w) v): positive per-row increments (or raw absolute
// positions). states [n x d], w [d x d_h], v [d_h x 1] -> [n x 1].
Tensor predict_increments(const Tensor& states, const Tensor& w,
                          const Tensor& v);

// p = 1 + running sum of increments; increments must be > 0.
Tensor aligned_positions(const Tensor& increments);
// Direct prediction without accumulation, floored at 1.
Tensor absolute_positions(const Tensor& raw);

// g(i) = floor(p_i + delta), clamped to [1, J] when the source is complete
// (J = received length otherwise), forced non-decreasing.
std::vector<int> output_positions(const std::vector<double>& p, double delta,
                                  int J, bool source_complete = true);

// One prior row over source positions 1..J: density(variant) around p with
// width sigma, zero beyond g, renormalized to sum 1 over j <= g.
std::vector<double> prior_row(double p, double sigma, int g, PriorVariant v,
                              int J);
// Row-wise posterior: alpha * prior renormalized over j <= g.
std::vector<double> posterior_row(const std::vector<double>& alpha,
                                  const std::vector<double>& prior, int g);

// Traced forms used by the model; row i uses p[i], sigma[i], g[i].
// p_col/sigma_col are [I x 1]; result [I x J].
Tensor prior_matrix(const Tensor& p_col, const Tensor& sigma_col,
                    const std::vector<int>& g, PriorVariant variant, int J);
Tensor posterior_attention(const Tensor& alpha, const Tensor& prior);
// Context rows: beta [I x J] times values [J x d_v].
Tensor gma_context(const Tensor& beta, const Tensor& values);

// ---- sharing across layers and heads ----

// Number of independent position tracks for L decoder layers with H heads.
int track_count(SharingMode mode, int layers, int heads);
// Distinct tracks whose predictor lives on this layer.
int tracks_owned_by_layer(SharingMode mode, int layers, int heads, int layer);
// Which track drives attention at (layer, head).
int track_index(SharingMode mode, int layers, int heads, int layer, int head);
// Overall write bound: per-step max across tracks, clamped to [1, J],
// non-decreasing.
std::vector<int> combined_output_positions(
    const std::vector<std::vector<int>>& per_track_g, int J);

// ---- recorded state for reporting and evaluation ----

struct AlignmentTrack {
  int layer = 0;                 // layer owning the predictor
  int head = -1;                 // -1 when heads share the track
  std::vector<double> delta_p;   // per step increment (incremental mode)
  std::vector<double> p;         // per step aligned position, p_0 = 1 implied
  std::vector<double> sigma;     // per step width, > 0
  std::vector<int> g;            // per step write bound of this track
};

struct AlignmentState {
  std::vector<AlignmentTrack> tracks;
  std::vector<int> g;  // overall per-step bound (max across tracks)
  int source_len = 0;

  // First track whose predictor belongs to the given decoder layer.
  const AlignmentTrack& track_for_layer(int layer) const;
};

// Per-(layer, head) attention matrices from a teacher-forced pass; each is
// I x J row-major.
struct AttentionMatrices {
  int layers = 0, heads = 0, rows = 0, cols = 0;
  std::vector<std::vector<double>> alpha, prior, beta;  // indexed layer*heads+head

  const std::vector<double>& alpha_at(int layer, int head) const;
  const std::vector<double>& prior_at(int layer, int head) const;
  const std::vector<double>& beta_at(int layer, int head) const;
};

}  // namespace gma
