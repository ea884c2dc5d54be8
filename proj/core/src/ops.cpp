#include "gma/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gma {

namespace {

using detail::make_op;
using detail::TensorNode;

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

// Right-aligned broadcast plan. Strides are in elements over the output
// index space, 0 where an input dim is stretched.
struct BcPlan {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;
  std::size_t n = 1;
};

BcPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  int nd = static_cast<int>(std::max(a.size(), b.size()));
  Shape pa(nd, 1), pb(nd, 1);
  for (std::size_t i = 0; i < a.size(); ++i) pa[nd - a.size() + i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) pb[nd - b.size() + i] = b[i];
  BcPlan plan;
  plan.out.resize(nd);
  for (int d = 0; d < nd; ++d) {
    if (pa[d] == pb[d] || pa[d] == 1 || pb[d] == 1) {
      plan.out[d] = std::max(pa[d], pb[d]);
    } else {
      throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) +
                                  " and " + shape_str(b) + " do not broadcast");
    }
  }
  plan.stride_a.assign(nd, 0);
  plan.stride_b.assign(nd, 0);
  std::size_t sa = 1, sb = 1;
  for (int d = nd - 1; d >= 0; --d) {
    plan.stride_a[d] = (pa[d] == 1) ? 0 : sa;
    plan.stride_b[d] = (pb[d] == 1) ? 0 : sb;
    sa *= static_cast<std::size_t>(pa[d]);
    sb *= static_cast<std::size_t>(pb[d]);
  }
  plan.n = shape_numel(plan.out);
  return plan;
}

// Walks the output space of a broadcast op, handing flat indices into both
// inputs to fn(out_idx, a_idx, b_idx).
template <typename Fn>
void for_broadcast(const BcPlan& plan, Fn&& fn) {
  int nd = static_cast<int>(plan.out.size());
  std::vector<int> idx(nd, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < plan.n; ++o) {
    fn(o, ia, ib);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      ia += plan.stride_a[d];
      ib += plan.stride_b[d];
      if (idx[d] < plan.out[d]) break;
      idx[d] = 0;
      ia -= plan.stride_a[d] * static_cast<std::size_t>(plan.out[d]);
      ib -= plan.stride_b[d] * static_cast<std::size_t>(plan.out[d]);
    }
  }
}

// fwd(x, y) -> out; dax(x, y, g) and dbx(x, y, g) give the two partials.
template <typename F, typename Da, typename Db>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F fwd,
                 Da dax, Db dbx) {
  require_defined(a, name);
  require_defined(b, name);
  const auto& av = a.values();
  const auto& bv = b.values();

  if (a.shape() == b.shape()) {  // hot path, no index arithmetic
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
    Tensor ta = a, tb = b;
    return make_op(a.shape(), std::move(out), {a, b},
                   [ta, tb, fwd, dax, dbx](TensorNode& self) {
                     const auto& g = self.grad;
                     const auto& x = ta.values();
                     const auto& y = tb.values();
                     if (ta.requires_grad()) {
                       auto& ga = ta.node()->grad_buf();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         ga[i] += dax(x[i], y[i], g[i]);
                     }
                     if (tb.requires_grad()) {
                       auto& gb = tb.node()->grad_buf();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gb[i] += dbx(x[i], y[i], g[i]);
                     }
                   });
  }

  BcPlan plan = plan_broadcast(a.shape(), b.shape(), name);
  std::vector<double> out(plan.n);
  for_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
    out[o] = fwd(av[ia], bv[ib]);
  });
  Tensor ta = a, tb = b;
  return make_op(plan.out, std::move(out), {a, b},
                 [ta, tb, plan, fwd, dax, dbx](TensorNode& self) {
                   const auto& g = self.grad;
                   const auto& x = ta.values();
                   const auto& y = tb.values();
                   if (ta.requires_grad()) {
                     auto& ga = ta.node()->grad_buf();
                     for_broadcast(plan, [&](std::size_t o, std::size_t ia,
                                             std::size_t ib) {
                       ga[ia] += dax(x[ia], y[ib], g[o]);
                     });
                   }
                   if (tb.requires_grad()) {
                     auto& gb = tb.node()->grad_buf();
                     for_broadcast(plan, [&](std::size_t o, std::size_t ia,
                                             std::size_t ib) {
                       gb[ib] += dbx(x[ia], y[ib], g[o]);
                     });
                   }
                 });
}

template <typename F, typename D>
Tensor unary_op(const Tensor& t, const char* name, F fwd, D dfdx) {
  require_defined(t, name);
  const auto& x = t.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  Tensor tt = t;
  return make_op(t.shape(), std::move(out), {t},
                 [tt, dfdx](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& x = tt.values();
                   const auto& y = self.values;
                   const auto& g = self.grad;
                   for (std::size_t i = 0; i < g.size(); ++i)
                     gi[i] += dfdx(x[i], y[i], g[i]);
                 });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; },
      [](double, double, double g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; },
      [](double, double, double g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double g) { return g / y; },
      [](double x, double y, double g) { return -g * x / (y * y); });
}

Tensor scale(const Tensor& t, double c) {
  return unary_op(
      t, "scale", [c](double x) { return c * x; },
      [c](double, double, double g) { return c * g; });
}

Tensor add_scalar(const Tensor& t, double c) {
  return unary_op(
      t, "add_scalar", [c](double x) { return x + c; },
      [](double, double, double g) { return g; });
}

Tensor neg(const Tensor& t) { return scale(t, -1.0); }

Tensor tanh(const Tensor& t) {
  return unary_op(
      t, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y, double g) { return g * (1.0 - y * y); });
}

Tensor exp(const Tensor& t) {
  return unary_op(
      t, "exp", [](double x) { return std::exp(x); },
      [](double, double y, double g) { return g * y; });
}

Tensor sqrt(const Tensor& t) {
  return unary_op(
      t, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y, double g) { return 0.5 * g / y; });
}

Tensor abs(const Tensor& t) {
  return unary_op(
      t, "abs", [](double x) { return std::fabs(x); },
      [](double x, double, double g) {
        return x > 0.0 ? g : (x < 0.0 ? -g : 0.0);
      });
}

Tensor relu(const Tensor& t) {
  return unary_op(
      t, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double, double g) { return x > 0.0 ? g : 0.0; });
}

Tensor clamp_min(const Tensor& t, double lo) {
  return unary_op(
      t, "clamp_min", [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double, double g) { return x > lo ? g : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.ndim() != 2 || b.ndim() != 2)
    throw std::invalid_argument("matmul: needs 2-d operands");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: inner dims " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* arow = av.data() + static_cast<std::size_t>(i) * k;
    double* orow = out.data() + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      double aik = arow[kk];
      if (aik == 0.0) continue;
      const double* brow = bv.data() + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  Tensor ta = a, tb = b;
  return make_op({m, n}, std::move(out), {a, b},
                 [ta, tb, m, k, n](TensorNode& self) {
                   const auto& g = self.grad;
                   const auto& av = ta.values();
                   const auto& bv = tb.values();
                   if (ta.requires_grad()) {
                     auto& ga = ta.node()->grad_buf();
                     // dA = G * B^T
                     for (int i = 0; i < m; ++i) {
                       const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                       double* garow = ga.data() + static_cast<std::size_t>(i) * k;
                       for (int kk = 0; kk < k; ++kk) {
                         const double* brow = bv.data() + static_cast<std::size_t>(kk) * n;
                         double s = 0.0;
                         for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                         garow[kk] += s;
                       }
                     }
                   }
                   if (tb.requires_grad()) {
                     auto& gb = tb.node()->grad_buf();
                     // dB = A^T * G
                     for (int i = 0; i < m; ++i) {
                       const double* arow = av.data() + static_cast<std::size_t>(i) * k;
                       const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                       for (int kk = 0; kk < k; ++kk) {
                         double aik = arow[kk];
                         if (aik == 0.0) continue;
                         double* gbrow = gb.data() + static_cast<std::size_t>(kk) * n;
                         for (int j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                       }
                     }
                   }
                 });
}

Tensor transpose(const Tensor& t) {
  require_defined(t, "transpose");
  if (t.ndim() != 2) throw std::invalid_argument("transpose: needs 2-d");
  int m = t.dim(0), n = t.dim(1);
  const auto& v = t.values();
  std::vector<double> out(v.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] = v[static_cast<std::size_t>(i) * n + j];
  Tensor tt = t;
  return make_op({n, m}, std::move(out), {t},
                 [tt, m, n](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   for (int i = 0; i < m; ++i)
                     for (int j = 0; j < n; ++j)
                       gi[static_cast<std::size_t>(i) * n + j] +=
                           g[static_cast<std::size_t>(j) * m + i];
                 });
}

Tensor reshape(const Tensor& t, Shape shape) {
  require_defined(t, "reshape");
  if (shape_numel(shape) != t.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor tt = t;
  return make_op(std::move(shape), t.values(), {t},
                 [tt](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                 });
}

Tensor slice_rows(const Tensor& t, int start, int count) {
  require_defined(t, "slice_rows");
  if (t.ndim() != 2) throw std::invalid_argument("slice_rows: needs 2-d");
  int m = t.dim(0), n = t.dim(1);
  if (start < 0 || count < 0 || start + count > m)
    throw std::out_of_range("slice_rows: range out of bounds");
  const auto& v = t.values();
  std::vector<double> out(v.begin() + static_cast<std::size_t>(start) * n,
                          v.begin() + static_cast<std::size_t>(start + count) * n);
  Tensor tt = t;
  return make_op({count, n}, std::move(out), {t},
                 [tt, start, n](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   std::size_t off = static_cast<std::size_t>(start) * n;
                   for (std::size_t i = 0; i < g.size(); ++i) gi[off + i] += g[i];
                 });
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
  require_defined(table, "embedding_rows");
  if (table.ndim() != 2) throw std::invalid_argument("embedding_rows: table needs 2-d");
  int v = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= v) throw std::out_of_range("embedding_rows: id out of range");
  const auto& tv = table.values();
  std::vector<double> out(ids.size() * static_cast<std::size_t>(d));
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[r]) * d, d,
                out.data() + r * d);
  Tensor tt = table;
  return make_op({static_cast<int>(ids.size()), d}, std::move(out), {table},
                 [tt, ids, d](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   for (std::size_t r = 0; r < ids.size(); ++r) {
                     double* dst = gi.data() + static_cast<std::size_t>(ids[r]) * d;
                     const double* src = g.data() + r * d;
                     for (int j = 0; j < d; ++j) dst[j] += src[j];
                   }
                 });
}

Tensor sum_all(const Tensor& t) {
  require_defined(t, "sum_all");
  double s = 0.0;
  for (double x : t.values()) s += x;
  Tensor tt = t;
  return make_op({1}, {s}, {t},
                 [tt](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   double g = self.grad[0];
                   for (double& x : gi) x += g;
                 });
}

Tensor sum_lastdim(const Tensor& t, bool keepdim) {
  require_defined(t, "sum_lastdim");
  if (t.ndim() < 1) throw std::invalid_argument("sum_lastdim: needs >= 1-d");
  int last = t.dim(t.ndim() - 1);
  std::size_t rows = t.numel() / static_cast<std::size_t>(last == 0 ? 1 : last);
  const auto& v = t.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = v.data() + r * last;
    double s = 0.0;
    for (int j = 0; j < last; ++j) s += p[j];
    out[r] = s;
  }
  Shape os(t.shape());
  if (keepdim) {
    os.back() = 1;
  } else {
    os.pop_back();
    if (os.empty()) os.push_back(1);
  }
  Tensor tt = t;
  return make_op(std::move(os), std::move(out), {t},
                 [tt, last](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   for (std::size_t r = 0; r < g.size(); ++r) {
                     double gr = g[r];
                     double* p = gi.data() + r * last;
                     for (int j = 0; j < last; ++j) p[j] += gr;
                   }
                 });
}

namespace {

// Shared softmax kernel; sup==nullptr means every entry is in support.
Tensor softmax_impl(const Tensor& t, const Tensor* mask, const char* name) {
  if (t.ndim() < 1) throw std::invalid_argument(std::string(name) + ": needs >= 1-d");
  int last = t.dim(t.ndim() - 1);
  if (last == 0) throw std::invalid_argument(std::string(name) + ": empty last dim");
  std::size_t rows = t.numel() / static_cast<std::size_t>(last);
  const auto& v = t.values();
  const std::vector<double>* mv = mask ? &mask->values() : nullptr;
  if (mask && mask->shape() != t.shape())
    throw std::invalid_argument(std::string(name) + ": mask shape mismatch");

  std::vector<double> out(v.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * last;
    const double* m = mv ? mv->data() + r * last : nullptr;
    double mx = 0.0;
    bool any = false;
    for (int j = 0; j < last; ++j) {
      if (m && (*(m + j) < 0.5)) continue;
      if (!any || x[j] > mx) mx = x[j];
      any = true;
    }
    if (!any)
      throw std::invalid_argument(std::string(name) + ": row with empty support");
    double z = 0.0;
    double* o = out.data() + r * last;
    for (int j = 0; j < last; ++j) {
      if (m && (*(m + j) < 0.5)) continue;
      o[j] = std::exp(x[j] - mx);
      z += o[j];
    }
    for (int j = 0; j < last; ++j) o[j] /= z;
  }
  Tensor tt = t;
  std::vector<Tensor> parents{t};
  if (mask) parents.push_back(*mask);
  return make_op(t.shape(), std::move(out), std::move(parents),
                 [tt, last](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& y = self.values;
                   const auto& g = self.grad;
                   std::size_t rows = y.size() / static_cast<std::size_t>(last);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* yr = y.data() + r * last;
                     const double* gr = g.data() + r * last;
                     double dot = 0.0;
                     for (int j = 0; j < last; ++j) dot += gr[j] * yr[j];
                     double* gir = gi.data() + r * last;
                     for (int j = 0; j < last; ++j)
                       gir[j] += yr[j] * (gr[j] - dot);
                   }
                 });
}

}  // namespace

Tensor softmax_lastdim(const Tensor& t) {
  require_defined(t, "softmax_lastdim");
  return softmax_impl(t, nullptr, "softmax_lastdim");
}

Tensor masked_softmax_lastdim(const Tensor& t, const Tensor& mask) {
  require_defined(t, "masked_softmax_lastdim");
  require_defined(mask, "masked_softmax_lastdim");
  return softmax_impl(t, &mask, "masked_softmax_lastdim");
}

Tensor cumsum_lastdim(const Tensor& t) {
  require_defined(t, "cumsum_lastdim");
  if (t.ndim() < 1) throw std::invalid_argument("cumsum_lastdim: needs >= 1-d");
  int last = t.dim(t.ndim() - 1);
  std::size_t rows = last == 0 ? 0 : t.numel() / static_cast<std::size_t>(last);
  const auto& v = t.values();
  std::vector<double> out(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * last;
    double* o = out.data() + r * last;
    double run = 0.0;
    for (int j = 0; j < last; ++j) {
      run += x[j];
      o[j] = run;
    }
  }
  Tensor tt = t;
  return make_op(t.shape(), std::move(out), {t},
                 [tt, last](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   std::size_t rows = g.size() / static_cast<std::size_t>(last);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* gr = g.data() + r * last;
                     double* gir = gi.data() + r * last;
                     double run = 0.0;
                     for (int j = last - 1; j >= 0; --j) {
                       run += gr[j];
                       gir[j] += run;
                     }
                   }
                 });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(bias, "layer_norm");
  if (x.ndim() < 1) throw std::invalid_argument("layer_norm: needs >= 1-d");
  int d = x.dim(x.ndim() - 1);
  if (gain.numel() != static_cast<std::size_t>(d) ||
      bias.numel() != static_cast<std::size_t>(d))
    throw std::invalid_argument("layer_norm: gain/bias size mismatch");
  std::size_t rows = x.numel() / static_cast<std::size_t>(d);
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  std::vector<double> out(xv.size());
  std::vector<double> rstd(rows), xhat(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = xv.data() + r * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += p[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (p[j] - mu) * (p[j] - mu);
    var /= d;
    double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    double* xh = xhat.data() + r * d;
    double* o = out.data() + r * d;
    for (int j = 0; j < d; ++j) {
      xh[j] = (p[j] - mu) * rs;
      o[j] = xh[j] * gv[j] + bv[j];
    }
  }
  Tensor tx = x, tg = gain, tb = bias;
  return make_op(x.shape(), std::move(out), {x, gain, bias},
                 [tx, tg, tb, d, rstd, xhat](TensorNode& self) {
                   const auto& g = self.grad;
                   const auto& gv = tg.values();
                   std::size_t rows = g.size() / static_cast<std::size_t>(d);
                   if (tx.requires_grad()) {
                     auto& gx = tx.node()->grad_buf();
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* gr = g.data() + r * d;
                       const double* xh = xhat.data() + r * d;
                       double* gxr = gx.data() + r * d;
                       double mean_dg = 0.0, mean_dgx = 0.0;
                       for (int j = 0; j < d; ++j) {
                         double dg = gr[j] * gv[j];
                         mean_dg += dg;
                         mean_dgx += dg * xh[j];
                       }
                       mean_dg /= d;
                       mean_dgx /= d;
                       for (int j = 0; j < d; ++j) {
                         double dg = gr[j] * gv[j];
                         gxr[j] += (dg - mean_dg - xh[j] * mean_dgx) * rstd[r];
                       }
                     }
                   }
                   if (tg.requires_grad()) {
                     auto& gg = tg.node()->grad_buf();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (int j = 0; j < d; ++j)
                         gg[j] += g[r * d + j] * xhat[r * d + j];
                   }
                   if (tb.requires_grad()) {
                     auto& gb = tb.node()->grad_buf();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (int j = 0; j < d; ++j) gb[j] += g[r * d + j];
                   }
                 });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>& mask) {
  require_defined(logits, "cross_entropy");
  if (logits.ndim() != 2) throw std::invalid_argument("cross_entropy: logits need 2-d");
  int n = logits.dim(0), v = logits.dim(1);
  if (targets.size() != static_cast<std::size_t>(n) ||
      mask.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("cross_entropy: targets/mask size mismatch");
  // Bad ids are corrupt input even on masked rows, so validate all of them.
  for (int r = 0; r < n; ++r)
    if (targets[r] < 0 || targets[r] >= v)
      throw std::out_of_range("cross_entropy: target id out of range");
  int count = 0;
  for (int r = 0; r < n; ++r)
    if (mask[r]) ++count;
  if (count == 0) throw std::invalid_argument("cross_entropy: empty mask");
  const auto& lv = logits.values();
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    if (!mask[r]) continue;
    const double* row = lv.data() + static_cast<std::size_t>(r) * v;
    double mx = row[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    total += (mx + std::log(z)) - row[targets[r]];
  }
  total /= count;
  Tensor tl = logits;
  return make_op({1}, {total}, {logits},
                 [tl, targets, mask, v, count](TensorNode& self) {
                   if (!tl.requires_grad()) return;
                   auto& gi = tl.node()->grad_buf();
                   const auto& lv = tl.values();
                   double g = self.grad[0] / count;
                   int n = tl.shape()[0];
                   for (int r = 0; r < n; ++r) {
                     if (!mask[r]) continue;
                     const double* row = lv.data() + static_cast<std::size_t>(r) * v;
                     double* grow = gi.data() + static_cast<std::size_t>(r) * v;
                     double mx = row[0];
                     for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
                     double z = 0.0;
                     for (int j = 0; j < v; ++j) z += std::exp(row[j] - mx);
                     for (int j = 0; j < v; ++j)
                       grow[j] += g * (std::exp(row[j] - mx) / z -
                                       (j == targets[r] ? 1.0 : 0.0));
                   }
                 });
}

Tensor dropout(const Tensor& t, double rate, Rng& rng) {
  require_defined(t, "dropout");
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return t;
  double keep = 1.0 - rate;
  const auto& v = t.values();
  std::vector<double> kept(v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    kept[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    out[i] = v[i] * kept[i];
  }
  Tensor tt = t;
  return make_op(t.shape(), std::move(out), {t},
                 [tt, kept](TensorNode& self) {
                   if (!tt.requires_grad()) return;
                   auto& gi = tt.node()->grad_buf();
                   const auto& g = self.grad;
                   for (std::size_t i = 0; i < g.size(); ++i)
                     gi[i] += g[i] * kept[i];
                 });
}

Tensor rand_uniform(Shape shape, double lo, double hi, Rng& rng,
                    bool requires_grad) {
  std::size_t n = shape_numel(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  if (requires_grad) return Tensor::param(std::move(shape), std::move(v));
  return Tensor::from_values(std::move(shape), std::move(v));
}

}  // namespace gma
