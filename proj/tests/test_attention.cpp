#include <cmath>
#include <vector>

#include "doctest.h"
#include "splat/attention.hpp"
#include "splat/grad_check.hpp"
#include "splat/ops.hpp"
#include "splat/rng.hpp"

using namespace splat;

namespace {

// Independent dense softmax-attention reference: full score matrix, row
// softmax, weighted value sum. Single head.
std::vector<double> dense_attention(const std::vector<double>& q, const std::vector<double>& k,
                                    const std::vector<double>& v, int n, int d) {
  std::vector<double> out(static_cast<size_t>(n) * d, 0.0);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i) {
    std::vector<double> scores(static_cast<size_t>(n));
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c)
        acc += q[static_cast<size_t>(i * d + c)] * k[static_cast<size_t>(j * d + c)];
      scores[static_cast<size_t>(j)] = acc * s;
      mx = std::max(mx, scores[static_cast<size_t>(j)]);
    }
    double sum = 0.0;
    for (double& x : scores) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < d; ++c)
        out[static_cast<size_t>(i * d + c)] +=
            scores[static_cast<size_t>(j)] / sum * v[static_cast<size_t>(j * d + c)];
  }
  return out;
}

Tensor randt(std::vector<int> shape, Rng& rng, bool grad = false) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.next_double() * 2.0 - 1.0;
  return Tensor::from_values(std::move(shape), std::move(v), grad);
}

}  // namespace

TEST_CASE("windowed kernel equals dense attention when the window covers everything") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.next_int(1, 16);
    const int d = 4;
    Tensor q = randt({n, d}, rng), k = randt({n, d}, rng), v = randt({n, d}, rng);
    Tensor out = windowed_global_attention(q, k, v, no_globals(n), n, 1);
    const std::vector<double> ref = dense_attention(q.values(), k.values(), v.values(), n, d);
    for (size_t i = 0; i < ref.size(); ++i) CHECK(std::fabs(out.values()[i] - ref[i]) < 1e-10);
  }
}

TEST_CASE("outside-window weight is exactly zero; globals are reachable") {
  const int n = 5;
  Rng rng(2);
  Tensor q = randt({n, n}, rng), k = randt({n, n}, rng);
  // V = identity makes output rows the attention distributions.
  std::vector<double> eye(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) eye[static_cast<size_t>(j * n + j)] = 1.0;
  Tensor v = Tensor::from_values({n, n}, eye);

  Tensor local = windowed_global_attention(q, k, v, no_globals(n), 1, 1);
  CHECK(local.values()[0 * n + 4] == 0.0);  // token 0 -> token 4, |i-j| > 1
  CHECK(local.values()[0 * n + 2] == 0.0);

  GlobalMask g = no_globals(n);
  g[4] = 1;
  Tensor withg = windowed_global_attention(q, k, v, g, 1, 1);
  CHECK(withg.values()[0 * n + 4] > 0.0);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += withg.values()[static_cast<size_t>(i * n + j)];
    CHECK(std::fabs(row - 1.0) < 1e-12);
  }
}

TEST_CASE("global token attends and is attended everywhere at N=8") {
  const int n = 8;
  Rng rng(3);
  Tensor q = randt({n, n}, rng), k = randt({n, n}, rng);
  std::vector<double> eye(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) eye[static_cast<size_t>(j * n + j)] = 1.0;
  Tensor v = Tensor::from_values({n, n}, eye);
  for (int g_pos = 0; g_pos < n; ++g_pos) {
    GlobalMask g = no_globals(n);
    g[static_cast<size_t>(g_pos)] = 1;
    Tensor out = windowed_global_attention(q, k, v, g, 1, 1);
    for (int j = 0; j < n; ++j) CHECK(out.values()[static_cast<size_t>(g_pos * n + j)] > 0.0);
    for (int i = 0; i < n; ++i) CHECK(out.values()[static_cast<size_t>(i * n + g_pos)] > 0.0);
    // and strictly local pairs stay zero
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (std::abs(i - j) > 1 && i != g_pos && j != g_pos)
          CHECK(out.values()[static_cast<size_t>(i * n + j)] == 0.0);
      }
    }
  }
}

TEST_CASE("attention weights are row-stochastic") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.next_int(2, 12);
    Tensor q = randt({n, n}, rng), k = randt({n, n}, rng);
    std::vector<double> eye(static_cast<size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) eye[static_cast<size_t>(j * n + j)] = 1.0;
    Tensor v = Tensor::from_values({n, n}, eye);
    GlobalMask g = no_globals(n);
    for (int j = 0; j < n; ++j) g[static_cast<size_t>(j)] = rng.next_double() < 0.3 ? 1 : 0;
    const int w = rng.next_int(0, 4);
    Tensor out = windowed_global_attention(q, k, v, g, w, 1);
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += out.values()[static_cast<size_t>(i * n + j)];
      CHECK(std::fabs(row - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("locality: no gradient flows to out-of-window values") {
  const int n = 6, d = 4, w = 1;
  Rng rng(5);
  Tensor q = randt({n, d}, rng, true), k = randt({n, d}, rng, true), v = randt({n, d}, rng, true);
  Tensor out = windowed_global_attention(q, k, v, no_globals(n), w, 1);
  // pull gradient only through output row 0
  Tensor row0 = gather_rows(out, {0});
  sum_all(row0).backward();
  for (int j = 0; j < n; ++j) {
    const bool in_window = std::abs(0 - j) <= w;
    for (int c = 0; c < d; ++c) {
      const double g = v.grad()[static_cast<size_t>(j * d + c)];
      if (in_window)
        CHECK(g != 0.0);
      else
        CHECK(g == 0.0);
    }
  }
}

TEST_CASE("attention backward matches finite differences") {
  ParamStore params(61);
  const int n = 5, d = 4;
  params.create("q", {n, d}, Init::TruncNormal, 0.5);
  params.create("k", {n, d}, Init::TruncNormal, 0.5);
  params.create("v", {n, d}, Init::TruncNormal, 0.5);
  GlobalMask g = no_globals(n);
  g[2] = 1;
  auto f = [&g](ParamStore& p) {
    Tensor out = windowed_global_attention(p.at("q"), p.at("k"), p.at("v"), g, 1, 2);
    return cross_entropy_rows(out, {0, 1, 2, 3, 0});
  };
  GradCheckResult r = grad_check(params, f, 1e-5, 60, 4);
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("multi-head output stacks per-head attention") {
  Rng rng(6);
  const int n = 4, d = 8, heads = 2, dh = d / heads;
  Tensor q = randt({n, d}, rng), k = randt({n, d}, rng), v = randt({n, d}, rng);
  Tensor out = windowed_global_attention(q, k, v, no_globals(n), n, heads);
  for (int h = 0; h < heads; ++h) {
    std::vector<double> qh(static_cast<size_t>(n) * dh), kh(qh.size()), vh(qh.size());
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < dh; ++c) {
        qh[static_cast<size_t>(i * dh + c)] = q.values()[static_cast<size_t>(i * d + h * dh + c)];
        kh[static_cast<size_t>(i * dh + c)] = k.values()[static_cast<size_t>(i * d + h * dh + c)];
        vh[static_cast<size_t>(i * dh + c)] = v.values()[static_cast<size_t>(i * d + h * dh + c)];
      }
    const std::vector<double> ref = dense_attention(qh, kh, vh, n, dh);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < dh; ++c)
        CHECK(std::fabs(out.values()[static_cast<size_t>(i * d + h * dh + c)] -
                        ref[static_cast<size_t>(i * dh + c)]) < 1e-10);
  }
}

TEST_CASE("score count examples and bound") {
  CHECK(attention_score_count(10, 10, 0) == 100);
  CHECK(attention_score_count(10, 64, 0) == 100);
  CHECK(attention_score_count(4, 1, 0) == 10);
  CHECK(attention_score_count(4, 0, 4) == 16);
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.next_int(1, 64);
    const int w = rng.next_int(0, 70);
    const int g = rng.next_int(0, n);
    const int64_t count = attention_score_count(n, w, g);
    CHECK(count <= static_cast<int64_t>(n) * (2 * w + 1) + 2LL * n * g);
    if (w >= n) CHECK(count >= static_cast<int64_t>(n) * n);
  }
}

TEST_CASE("mask length mismatch raises") {
  Rng rng(8);
  Tensor q = randt({3, 2}, rng);
  CHECK_THROWS_AS(windowed_global_attention(q, q, q, no_globals(5), 1, 1), std::runtime_error);
}
