#pragma once

#include <cstdint>
#include <vector>

#include "gma/rng.hpp"
#include "gma/tensor.hpp"

namespace gma {

// Differentiable ops. Binary elementwise ops broadcast numpy-style
// (right-aligned, size-1 dims stretch); gradients reduce back over the
// stretched dims. All ops validate shapes and throw std::invalid_argument
// on mismatch.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& t, double c);
Tensor add_scalar(const Tensor& t, double c);
Tensor neg(const Tensor& t);

Tensor tanh(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor sqrt(const Tensor& t);
Tensor abs(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor clamp_min(const Tensor& t, double lo);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& t);
Tensor reshape(const Tensor& t, Shape shape);
Tensor slice_rows(const Tensor& t, int start, int count);
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);

Tensor sum_all(const Tensor& t);
Tensor sum_lastdim(const Tensor& t, bool keepdim);

// Rows sum to 1; max is subtracted before exponentiation so shifted inputs
// give identical rows.
Tensor softmax_lastdim(const Tensor& t);
// mask holds 0/1 values (not differentiated). Masked-out entries are exactly
// 0 in the output; each row needs at least one in-mask entry.
Tensor masked_softmax_lastdim(const Tensor& t, const Tensor& mask);

// Running sum along the last dim; gradient is the reverse running sum.
Tensor cumsum_lastdim(const Tensor& t);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Mean negative log-likelihood over rows with mask=1, computed from logits
// via the shifted log-sum-exp. targets[i] indexes the correct class.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<std::uint8_t>& mask);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& t, double rate, Rng& rng);

Tensor rand_uniform(Shape shape, double lo, double hi, Rng& rng,
                    bool requires_grad = false);

}  // namespace gma
