#pragma once

#include <cstdint>
#include <vector>

#include "splat/tensor.hpp"

namespace splat {

// Marks which positions receive full (global) attention.
using GlobalMask = std::vector<uint8_t>;

inline GlobalMask no_globals(int n) { return GlobalMask(static_cast<size_t>(n), 0); }

// Sparse attention with a symmetric local window plus selective global
// tokens. Query i attends {j : |i-j| <= window_w} plus every global token;
// a global query attends everything. Scores outside that set are never
// computed. q/k/v are [N, n_heads * d_head]; scaling is 1/sqrt(d_head).
Tensor windowed_global_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const GlobalMask& global_mask, int window_w, int n_heads = 1);

// Exact number of query-key score evaluations the kernel performs for one
// head. Bounded by N*(2w+1) + 2*N*n_global.
int64_t attention_score_count(int n, int window_w, int n_global);

}  // namespace splat
