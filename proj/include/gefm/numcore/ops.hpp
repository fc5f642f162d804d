#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gefm/numcore/tensor.hpp"

// Differentiable operations. Every op checks its output for NaN/Inf and, when
// grad recording is enabled and an input requires grad, records a backward
// rule. Shapes must match exactly except where an op documents a broadcast.
namespace gefm::num {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

/// x[..., c] + b[c] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& b);
/// [n, k] x [k, m] -> [n, m]; leading extents of `a` are flattened into n.
Tensor matmul(const Tensor& a, const Tensor& b);
/// matmul(x, w) + b in one recorded node.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Concatenation along the last axis; all inputs share the row count.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Columns [start, start + len) of the last axis.
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);

/// out[i] = a[idx[i]] (row gather).
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx);
/// out[idx[i]] += src[i]; rows of out not referenced stay zero.
Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> idx, std::size_t n_rows);
/// out[r] = a[r] * factors[r] with constant factors.
Tensor scale_rows(const Tensor& a, std::span<const double> factors);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over all rows: [..., c] -> [c].
Tensor sum_rows(const Tensor& a);

Tensor abs(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor swish(const Tensor& a);

/// Per-row normalization to zero mean / unit variance followed by the learned
/// affine map gain * x + bias (gain, bias have the row width).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

}  // namespace gefm::num
