#pragma once

#include <vector>

#include "splat/rng.hpp"
#include "splat/tensor.hpp"

namespace splat {

// Elementwise sum/product, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Same data, new shape with equal element count.
Tensor reshape(const Tensor& x, std::vector<int> shape);

// out[i,j] = sum_k x[i,k] * w[k,j] + b[j]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// out[i,j] = sum_d a[i,d] * b[j,d]   (dot-product similarity matrix)
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Row gather from a 2-D tensor; backward scatter-adds.
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);

// Column-wise concatenation of two 2-D tensors with equal row counts.
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Per-row normalization over the last axis, then gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// tanh-approximation GeLU, elementwise.
Tensor gelu(const Tensor& x);

// Numerically stable softmax along `axis`. Rejects non-finite input.
Tensor softmax(const Tensor& x, int axis);

// -log softmax(scores)[gt] for a 1-D score vector.
Tensor cross_entropy_from_scores(const Tensor& scores, int gt_index);

// Mean of per-row cross-entropies for [n,k] scores and n gold indices.
Tensor cross_entropy_rows(const Tensor& scores, const std::vector<int>& gt_indices);

// Arithmetic mean of scalar tensors.
Tensor mean_scalars(const std::vector<Tensor>& xs);

// Sum of all entries, as a scalar.
Tensor sum_all(const Tensor& x);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

}  // namespace splat
