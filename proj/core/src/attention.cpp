#include "gma/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gma {

std::string to_string(PriorVariant v) {
  switch (v) {
    case PriorVariant::gaussian: return "gaussian";
    case PriorVariant::laplace: return "laplace";
    case PriorVariant::linear: return "linear";
    case PriorVariant::none: return "none";
  }
  return "?";
}

std::string to_string(SigmaMode m) {
  switch (m) {
    case SigmaMode::half: return "half";
    case SigmaMode::full: return "full";
    case SigmaMode::third: return "third";
    case SigmaMode::predicted: return "predicted";
  }
  return "?";
}

std::string to_string(SharingMode m) {
  switch (m) {
    case SharingMode::all_independent: return "all_independent";
    case SharingMode::share_heads: return "share_heads";
    case SharingMode::share_layers: return "share_layers";
    case SharingMode::share_all: return "share_all";
  }
  return "?";
}

std::string to_string(PositionMode m) {
  return m == PositionMode::incremental ? "incremental" : "absolute";
}

PriorVariant prior_variant_from_string(const std::string& s) {
  if (s == "gaussian") return PriorVariant::gaussian;
  if (s == "laplace") return PriorVariant::laplace;
  if (s == "linear") return PriorVariant::linear;
  if (s == "none") return PriorVariant::none;
  throw std::invalid_argument("unknown prior_variant: " + s);
}

SigmaMode sigma_mode_from_string(const std::string& s) {
  if (s == "half") return SigmaMode::half;
  if (s == "full") return SigmaMode::full;
  if (s == "third") return SigmaMode::third;
  if (s == "predicted") return SigmaMode::predicted;
  throw std::invalid_argument("unknown sigma_mode: " + s);
}

SharingMode sharing_mode_from_string(const std::string& s) {
  if (s == "all_independent") return SharingMode::all_independent;
  if (s == "share_heads") return SharingMode::share_heads;
  if (s == "share_layers") return SharingMode::share_layers;
  if (s == "share_all") return SharingMode::share_all;
  throw std::invalid_argument("unknown sharing_mode: " + s);
}

PositionMode position_mode_from_string(const std::string& s) {
  if (s == "incremental") return PositionMode::incremental;
  if (s == "absolute") return PositionMode::absolute;
  throw std::invalid_argument("unknown position_mode: " + s);
}

void GmaConfig::validate() const {
  if (!(delta >= 0.0)) throw std::invalid_argument("gma: delta must be >= 0");
}

Tensor soft_attention(const Tensor& queries, const Tensor& keys) {
  if (queries.ndim() != 2 || keys.ndim() != 2 || queries.dim(1) != keys.dim(1))
    throw std::invalid_argument("soft_attention: need [I x d] queries, [J x d] keys");
  double s = 1.0 / std::sqrt(static_cast<double>(queries.dim(1)));
  return softmax_lastdim(scale(matmul(queries, transpose(keys)), s));
}

Tensor soft_attention_masked(const Tensor& queries, const Tensor& keys,
                             const Tensor& mask) {
  if (queries.ndim() != 2 || keys.ndim() != 2 || queries.dim(1) != keys.dim(1))
    throw std::invalid_argument("soft_attention: need [I x d] queries, [J x d] keys");
  double s = 1.0 / std::sqrt(static_cast<double>(queries.dim(1)));
  return masked_softmax_lastdim(scale(matmul(queries, transpose(keys)), s), mask);
}

Tensor predict_increments(const Tensor& states, const Tensor& w,
                          const Tensor& v) {
  if (states.ndim() != 2 || w.ndim() != 2 || v.ndim() != 2 ||
      states.dim(1) != w.dim(0) || w.dim(1) != v.dim(0) || v.dim(1) != 1)
    throw std::invalid_argument("predict_increments: shape mismatch");
  return exp(matmul(tanh(matmul(states, w)), v));
}

Tensor aligned_positions(const Tensor& increments) {
  if (!increments.defined() || increments.numel() == 0)
    throw std::invalid_argument("aligned_positions: empty increments");
  for (double d : increments.values())
    if (!(d > 0.0))
      throw std::invalid_argument("aligned_positions: increments must be > 0");
  int n = static_cast<int>(increments.numel());
  Tensor row = reshape(increments, {1, n});
  return reshape(add_scalar(cumsum_lastdim(row), 1.0), {n, 1});
}

Tensor absolute_positions(const Tensor& raw) {
  if (!raw.defined() || raw.numel() == 0)
    throw std::invalid_argument("absolute_positions: empty input");
  int n = static_cast<int>(raw.numel());
  return reshape(clamp_min(raw, 1.0), {n, 1});
}

std::vector<int> output_positions(const std::vector<double>& p, double delta,
                                  int J, bool source_complete) {
  if (J < 1) throw std::invalid_argument("output_positions: J must be >= 1");
  if (delta < 0.0) throw std::invalid_argument("output_positions: delta must be >= 0");
  std::vector<int> g(p.size());
  int prev = 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 1.0))
      throw std::invalid_argument("output_positions: p must be >= 1");
    double raw = std::floor(p[i] + delta);
    // J is the final length when the source is complete; otherwise the bound
    // may exceed what has been received and the caller must wait.
    if (source_complete && raw > static_cast<double>(J)) raw = J;
    if (raw < 1.0) raw = 1.0;
    if (raw > 1073741824.0) raw = 1073741824.0;  // keep the int cast in range
    int gi = std::max(static_cast<int>(raw), prev);
    g[i] = gi;
    prev = gi;
  }
  return g;
}

namespace {

void check_row_args(double sigma, int g, int J, PriorVariant v) {
  if (J < 1) throw std::invalid_argument("prior: J must be >= 1");
  if (g < 1) throw std::invalid_argument("prior: g must be >= 1");
  if (g > J) throw std::invalid_argument("prior: g must be <= J");
  if (v != PriorVariant::none && v != PriorVariant::linear && !(sigma > 0.0))
    throw std::invalid_argument("prior: sigma must be > 0");
}

}  // namespace

std::vector<double> prior_row(double p, double sigma, int g, PriorVariant v,
                              int J) {
  check_row_args(sigma, g, J, v);
  std::vector<double> row(static_cast<std::size_t>(J), 0.0);
  if (v == PriorVariant::none) {
    double u = 1.0 / g;
    for (int j = 0; j < g; ++j) row[j] = u;
    return row;
  }
  if (v == PriorVariant::linear) {
    double slope = 1.0 / (g + 1.0);
    double z = 0.0;
    for (int j = 1; j <= g; ++j) {
      double w = std::max(0.0, 1.0 - std::fabs(j - p) * slope);
      row[j - 1] = w;
      z += w;
    }
    if (!(z > 0.0))
      throw std::runtime_error("prior: degenerate row (all weights zero)");
    for (int j = 0; j < g; ++j) row[j] /= z;
    return row;
  }
  // log-density, shifted by its max so the normalization is stable
  double mx = -1e300;
  std::vector<double> logw(static_cast<std::size_t>(g));
  for (int j = 1; j <= g; ++j) {
    double d = j - p;
    double lw = v == PriorVariant::gaussian ? -(d * d) / (2.0 * sigma * sigma)
                                            : -std::fabs(d) / sigma;
    logw[j - 1] = lw;
    mx = std::max(mx, lw);
  }
  double z = 0.0;
  for (int j = 0; j < g; ++j) {
    row[j] = std::exp(logw[j] - mx);
    z += row[j];
  }
  for (int j = 0; j < g; ++j) row[j] /= z;
  return row;
}

std::vector<double> posterior_row(const std::vector<double>& alpha,
                                  const std::vector<double>& prior, int g) {
  if (alpha.size() != prior.size())
    throw std::invalid_argument("posterior_row: size mismatch");
  if (g < 1 || g > static_cast<int>(alpha.size()))
    throw std::invalid_argument("posterior_row: g out of range");
  std::vector<double> beta(alpha.size(), 0.0);
  double z = 0.0;
  for (int j = 0; j < g; ++j) {
    beta[j] = alpha[j] * prior[j];
    z += beta[j];
  }
  if (!(z > 0.0))
    throw std::runtime_error("posterior_row: degenerate row (zero mass)");
  for (int j = 0; j < g; ++j) beta[j] /= z;
  return beta;
}

Tensor prior_matrix(const Tensor& p_col, const Tensor& sigma_col,
                    const std::vector<int>& g, PriorVariant variant, int J) {
  if (p_col.ndim() != 2 || p_col.dim(1) != 1)
    throw std::invalid_argument("prior_matrix: p must be [I x 1]");
  int rows = p_col.dim(0);
  if (static_cast<int>(g.size()) != rows)
    throw std::invalid_argument("prior_matrix: g size mismatch");
  for (int gi : g) check_row_args(1.0, gi, J, PriorVariant::none);

  std::vector<double> mask_v(static_cast<std::size_t>(rows) * J, 0.0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < g[i]; ++j) mask_v[static_cast<std::size_t>(i) * J + j] = 1.0;

  if (variant == PriorVariant::none) {
    // Uniform over the received prefix: a constant, so no gradient reaches
    // the position predictor through the prior.
    std::vector<double> v(static_cast<std::size_t>(rows) * J, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < g[i]; ++j)
        v[static_cast<std::size_t>(i) * J + j] = 1.0 / g[i];
    return Tensor::from_values({rows, J}, std::move(v));
  }

  Tensor mask = Tensor::from_values({rows, J}, std::move(mask_v));
  std::vector<double> grid(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) grid[j] = j + 1.0;
  Tensor jgrid = Tensor::from_values({1, J}, std::move(grid));
  Tensor diff = sub(jgrid, p_col);  // [I x J]

  if (variant == PriorVariant::gaussian) {
    if (sigma_col.ndim() != 2 || sigma_col.dim(0) != rows || sigma_col.dim(1) != 1)
      throw std::invalid_argument("prior_matrix: sigma must be [I x 1]");
    Tensor arg = div(scale(mul(diff, diff), -0.5), mul(sigma_col, sigma_col));
    return masked_softmax_lastdim(arg, mask);
  }
  if (variant == PriorVariant::laplace) {
    if (sigma_col.ndim() != 2 || sigma_col.dim(0) != rows || sigma_col.dim(1) != 1)
      throw std::invalid_argument("prior_matrix: sigma must be [I x 1]");
    Tensor arg = neg(div(abs(diff), sigma_col));
    return masked_softmax_lastdim(arg, mask);
  }
  // linear: slope fixed at 1/(g_i + 1) so the farthest in-support word keeps
  // positive weight while the position stays inside the prefix
  std::vector<double> invg(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) invg[i] = 1.0 / (g[i] + 1.0);
  Tensor invg_col = Tensor::from_values({rows, 1}, std::move(invg));
  Tensor ones = Tensor::full({rows, J}, 1.0);
  Tensor raw = mul(relu(sub(ones, mul(abs(diff), invg_col))), mask);
  Tensor z = sum_lastdim(raw, true);
  for (double zv : z.values())
    if (!(zv > 0.0))
      throw std::runtime_error("prior_matrix: degenerate row (all weights zero)");
  return div(raw, z);
}

Tensor posterior_attention(const Tensor& alpha, const Tensor& prior) {
  if (alpha.shape() != prior.shape() || alpha.ndim() != 2)
    throw std::invalid_argument("posterior_attention: shape mismatch");
  Tensor unnorm = mul(alpha, prior);
  Tensor z = sum_lastdim(unnorm, true);
  for (double zv : z.values())
    if (!(zv > 0.0))
      throw std::runtime_error("posterior_attention: degenerate row (zero mass)");
  return div(unnorm, z);
}

Tensor gma_context(const Tensor& beta, const Tensor& values) {
  return matmul(beta, values);
}

int track_count(SharingMode mode, int layers, int heads) {
  if (layers < 1 || heads < 1)
    throw std::invalid_argument("track_count: layers/heads must be >= 1");
  switch (mode) {
    case SharingMode::all_independent: return layers * heads;
    case SharingMode::share_heads: return layers;
    case SharingMode::share_layers: return heads;
    case SharingMode::share_all: return 1;
  }
  return 0;
}

int tracks_owned_by_layer(SharingMode mode, int layers, int heads, int layer) {
  if (layer < 0 || layer >= layers)
    throw std::out_of_range("tracks_owned_by_layer: layer out of range");
  switch (mode) {
    case SharingMode::all_independent: return heads;
    case SharingMode::share_heads: return 1;
    case SharingMode::share_layers: return layer == 0 ? heads : 0;
    case SharingMode::share_all: return layer == 0 ? 1 : 0;
  }
  return 0;
}

int track_index(SharingMode mode, int layers, int heads, int layer, int head) {
  if (layer < 0 || layer >= layers || head < 0 || head >= heads)
    throw std::out_of_range("track_index: layer/head out of range");
  switch (mode) {
    case SharingMode::all_independent: return layer * heads + head;
    case SharingMode::share_heads: return layer;
    case SharingMode::share_layers: return head;  // layer-0 tracks reused everywhere
    case SharingMode::share_all: return 0;
  }
  return 0;
}

std::vector<int> combined_output_positions(
    const std::vector<std::vector<int>>& per_track_g, int J) {
  if (per_track_g.empty())
    throw std::invalid_argument("combined_output_positions: no tracks");
  std::size_t steps = per_track_g[0].size();
  for (const auto& t : per_track_g)
    if (t.size() != steps)
      throw std::invalid_argument("combined_output_positions: ragged tracks");
  std::vector<int> g(steps);
  int prev = 1;
  for (std::size_t i = 0; i < steps; ++i) {
    int m = 1;
    for (const auto& t : per_track_g) m = std::max(m, t[i]);
    m = std::min(m, J);
    m = std::max(m, prev);
    g[i] = m;
    prev = m;
  }
  return g;
}

const AlignmentTrack& AlignmentState::track_for_layer(int layer) const {
  for (const auto& t : tracks)
    if (t.layer == layer) return t;
  // layers without an owned predictor reuse the shared track
  if (!tracks.empty()) return tracks.front();
  throw std::runtime_error("alignment state: no tracks");
}

namespace {
std::size_t mat_index(const AttentionMatrices& m, int layer, int head) {
  if (layer < 0 || layer >= m.layers || head < 0 || head >= m.heads)
    throw std::out_of_range("attention matrices: layer/head out of range");
  return static_cast<std::size_t>(layer) * m.heads + head;
}
}  // namespace

const std::vector<double>& AttentionMatrices::alpha_at(int layer, int head) const {
  return alpha[mat_index(*this, layer, head)];
}
const std::vector<double>& AttentionMatrices::prior_at(int layer, int head) const {
  return prior[mat_index(*this, layer, head)];
}
const std::vector<double>& AttentionMatrices::beta_at(int layer, int head) const {
  return beta[mat_index(*this, layer, head)];
}

}  // namespace gma
