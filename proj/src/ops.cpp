#include "splat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splat {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

void require_finite(const std::vector<double>& v, const char* op) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::runtime_error(std::string(op) + ": non-finite input");
}

constexpr double kGeluC = 0.79788456080286535588;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    for (int p = 0; p < 2; ++p) {
      TensorNode& par = *self.parents[static_cast<size_t>(p)];
      if (!par.requires_grad) continue;
      for (size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    TensorNode& an = *self.parents[0];
    TensorNode& bn = *self.parents[1];
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (an.requires_grad) an.grad[i] += self.grad[i] * bn.value[i];
      if (bn.requires_grad) bn.grad[i] += self.grad[i] * an.value[i];
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  require(shape_numel(shape) == x.numel(), "reshape: " + shape_str(x.shape()) + " -> " +
                                               shape_str(shape) + " changes element count");
  return Tensor::make_node(std::move(shape), x.values(), {x}, [](TensorNode& self) {
    TensorNode& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
  return Tensor::make_node(a.shape(), std::move(out), {a}, [s](TensorNode& self) {
    TensorNode& par = *self.parents[0];
    if (!par.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i] * s;
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.ndim() == 2 && w.ndim() == 2 && b.ndim() == 1,
          "affine: expected x[n,d_in], w[d_in,d_out], b[d_out], got " + shape_str(x.shape()) +
              ", " + shape_str(w.shape()) + ", " + shape_str(b.shape()));
  const int n = x.dim(0), d_in = x.dim(1), d_out = w.dim(1);
  require(w.dim(0) == d_in && b.dim(0) == d_out,
          "affine: shape mismatch x" + shape_str(x.shape()) + " w" + shape_str(w.shape()) + " b" +
              shape_str(b.shape()));
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  const double* bv = b.values().data();
  std::vector<double> out(static_cast<size_t>(n) * d_out);
  for (int i = 0; i < n; ++i) {
    double* o = out.data() + static_cast<size_t>(i) * d_out;
    for (int j = 0; j < d_out; ++j) o[j] = bv[j];
    const double* xr = xv + static_cast<size_t>(i) * d_in;
    for (int k = 0; k < d_in; ++k) {
      const double xk = xr[k];
      const double* wr = wv + static_cast<size_t>(k) * d_out;
      for (int j = 0; j < d_out; ++j) o[j] += xk * wr[j];
    }
  }
  return Tensor::make_node(
      {n, d_out}, std::move(out), {x, w, b}, [n, d_in, d_out](TensorNode& self) {
        TensorNode& xn = *self.parents[0];
        TensorNode& wn = *self.parents[1];
        TensorNode& bn = *self.parents[2];
        const double* g = self.grad.data();
        if (xn.requires_grad) {
          const double* wv = wn.value.data();
          for (int i = 0; i < n; ++i) {
            const double* gr = g + static_cast<size_t>(i) * d_out;
            double* xg = xn.grad.data() + static_cast<size_t>(i) * d_in;
            for (int k = 0; k < d_in; ++k) {
              const double* wr = wv + static_cast<size_t>(k) * d_out;
              double acc = 0.0;
              for (int j = 0; j < d_out; ++j) acc += gr[j] * wr[j];
              xg[k] += acc;
            }
          }
        }
        if (wn.requires_grad) {
          const double* xv = xn.value.data();
          for (int i = 0; i < n; ++i) {
            const double* gr = g + static_cast<size_t>(i) * d_out;
            const double* xr = xv + static_cast<size_t>(i) * d_in;
            for (int k = 0; k < d_in; ++k) {
              const double xk = xr[k];
              double* wg = wn.grad.data() + static_cast<size_t>(k) * d_out;
              for (int j = 0; j < d_out; ++j) wg[j] += xk * gr[j];
            }
          }
        }
        if (bn.requires_grad) {
          for (int i = 0; i < n; ++i) {
            const double* gr = g + static_cast<size_t>(i) * d_out;
            for (int j = 0; j < d_out; ++j) bn.grad[static_cast<size_t>(j)] += gr[j];
          }
        }
      });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
          "matmul_nt: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int n = a.dim(0), m = b.dim(0), d = a.dim(1);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  std::vector<double> out(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    const double* ar = av + static_cast<size_t>(i) * d;
    double* o = out.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* br = bv + static_cast<size_t>(j) * d;
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += ar[k] * br[k];
      o[j] = acc;
    }
  }
  return Tensor::make_node({n, m}, std::move(out), {a, b}, [n, m, d](TensorNode& self) {
    TensorNode& an = *self.parents[0];
    TensorNode& bn = *self.parents[1];
    const double* g = self.grad.data();
    if (an.requires_grad) {
      for (int i = 0; i < n; ++i) {
        const double* gr = g + static_cast<size_t>(i) * m;
        double* ag = an.grad.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < m; ++j) {
          const double gij = gr[j];
          if (gij == 0.0) continue;
          const double* br = bn.value.data() + static_cast<size_t>(j) * d;
          for (int k = 0; k < d; ++k) ag[k] += gij * br[k];
        }
      }
    }
    if (bn.requires_grad) {
      for (int i = 0; i < n; ++i) {
        const double* gr = g + static_cast<size_t>(i) * m;
        const double* ar = an.value.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < m; ++j) {
          const double gij = gr[j];
          if (gij == 0.0) continue;
          double* bg = bn.grad.data() + static_cast<size_t>(j) * d;
          for (int k = 0; k < d; ++k) bg[k] += gij * ar[k];
        }
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  require(x.ndim() == 2, "gather_rows: expected 2-D tensor, got " + shape_str(x.shape()));
  const int n = x.dim(0), d = x.dim(1);
  for (int r : rows)
    require(r >= 0 && r < n,
            "gather_rows: row " + std::to_string(r) + " out of range [0," + std::to_string(n) + ")");
  const int k = static_cast<int>(rows.size());
  std::vector<double> out(static_cast<size_t>(k) * d);
  const double* xv = x.values().data();
  for (int i = 0; i < k; ++i)
    std::copy_n(xv + static_cast<size_t>(rows[static_cast<size_t>(i)]) * d, d,
                out.data() + static_cast<size_t>(i) * d);
  return Tensor::make_node({k, d}, std::move(out), {x}, [rows, d](TensorNode& self) {
    TensorNode& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (size_t i = 0; i < rows.size(); ++i) {
      const double* gr = self.grad.data() + i * static_cast<size_t>(d);
      double* xg = xn.grad.data() + static_cast<size_t>(rows[i]) * d;
      for (int j = 0; j < d; ++j) xg[j] += gr[j];
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(0) == b.dim(0),
          "concat_cols: row mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int n = a.dim(0), da = a.dim(1), db = b.dim(1);
  std::vector<double> out(static_cast<size_t>(n) * (da + db));
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.values().data() + static_cast<size_t>(i) * da, da,
                out.data() + static_cast<size_t>(i) * (da + db));
    std::copy_n(b.values().data() + static_cast<size_t>(i) * db, db,
                out.data() + static_cast<size_t>(i) * (da + db) + da);
  }
  return Tensor::make_node({n, da + db}, std::move(out), {a, b}, [n, da, db](TensorNode& self) {
    TensorNode& an = *self.parents[0];
    TensorNode& bn = *self.parents[1];
    for (int i = 0; i < n; ++i) {
      const double* gr = self.grad.data() + static_cast<size_t>(i) * (da + db);
      if (an.requires_grad) {
        double* ag = an.grad.data() + static_cast<size_t>(i) * da;
        for (int j = 0; j < da; ++j) ag[j] += gr[j];
      }
      if (bn.requires_grad) {
        double* bg = bn.grad.data() + static_cast<size_t>(i) * db;
        for (int j = 0; j < db; ++j) bg[j] += gr[da + j];
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require(x.ndim() >= 1, "layer_norm: rank-0 input");
  const int d = x.dim(x.ndim() - 1);
  require(d >= 1, "layer_norm: normalized dimension is zero");
  require(gain.ndim() == 1 && gain.dim(0) == d && bias.ndim() == 1 && bias.dim(0) == d,
          "layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
              " do not match feature size " + std::to_string(d));
  const int64_t rows = x.numel() / d;
  const double* xv = x.values().data();
  const double* gv = gain.values().data();
  const double* bv = bias.values().data();
  std::vector<double> out(x.values().size());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  std::vector<double> xhat(x.values().size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv + r * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    double* xh = xhat.data() + r * d;
    double* o = out.data() + r * d;
    for (int j = 0; j < d; ++j) {
      xh[j] = (xr[j] - mean) * is;
      o[j] = xh[j] * gv[j] + bv[j];
    }
  }
  return Tensor::make_node(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, d, inv_std = std::move(inv_std), xhat = std::move(xhat)](TensorNode& self) {
        TensorNode& xn = *self.parents[0];
        TensorNode& gn = *self.parents[1];
        TensorNode& bn = *self.parents[2];
        const double* g = self.grad.data();
        for (int64_t r = 0; r < rows; ++r) {
          const double* gr = g + r * d;
          const double* xh = xhat.data() + r * d;
          if (gn.requires_grad)
            for (int j = 0; j < d; ++j) gn.grad[static_cast<size_t>(j)] += gr[j] * xh[j];
          if (bn.requires_grad)
            for (int j = 0; j < d; ++j) bn.grad[static_cast<size_t>(j)] += gr[j];
          if (xn.requires_grad) {
            // dx = (gy - mean(gy) - xhat * mean(gy*xhat)) * inv_std, gy = g * gain
            double mean_gy = 0.0, mean_gyx = 0.0;
            for (int j = 0; j < d; ++j) {
              const double gy = gr[j] * gn.value[static_cast<size_t>(j)];
              mean_gy += gy;
              mean_gyx += gy * xh[j];
            }
            mean_gy /= d;
            mean_gyx /= d;
            double* xg = xn.grad.data() + r * d;
            const double is = inv_std[static_cast<size_t>(r)];
            for (int j = 0; j < d; ++j) {
              const double gy = gr[j] * gn.value[static_cast<size_t>(j)];
              xg[j] += (gy - mean_gy - xh[j] * mean_gyx) * is;
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  require_finite(x.values(), "gelu");
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return Tensor::make_node(x.shape(), std::move(out), {x}, [](TensorNode& self) {
    TensorNode& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double v = xn.value[i];
      const double u = kGeluC * (v + kGeluA * v * v * v);
      const double t = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      const double dgelu = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      xn.grad[i] += self.grad[i] * dgelu;
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  require_finite(x.values(), "softmax");
  const int nd = x.ndim();
  if (axis < 0) axis += nd;
  require(axis >= 0 && axis < nd, "softmax: axis " + std::to_string(axis) + " out of range for " +
                                      shape_str(x.shape()));
  const int k = x.dim(axis);
  require(k >= 1, "softmax: empty axis");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  const double* xv = x.values().data();
  std::vector<double> out(x.values().size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * k * inner + in;
      double mx = xv[base];
      for (int j = 1; j < k; ++j) mx = std::max(mx, xv[base + j * inner]);
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[static_cast<size_t>(base + j * inner)] = e;
        sum += e;
      }
      for (int j = 0; j < k; ++j) out[static_cast<size_t>(base + j * inner)] /= sum;
    }
  }
  std::vector<double> probs = out;  // saved for backward
  return Tensor::make_node(
      x.shape(), std::move(out), {x}, [outer, inner, k, probs = std::move(probs)](TensorNode& self) {
        TensorNode& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * k * inner + in;
            double dot = 0.0;
            for (int j = 0; j < k; ++j) {
              const size_t idx = static_cast<size_t>(base + j * inner);
              dot += self.grad[idx] * probs[idx];
            }
            for (int j = 0; j < k; ++j) {
              const size_t idx = static_cast<size_t>(base + j * inner);
              xn.grad[idx] += probs[idx] * (self.grad[idx] - dot);
            }
          }
        }
      });
}

namespace {

// Shared stable log-softmax row CE. Returns loss and fills probs.
double ce_row(const double* s, int k, int gt, std::vector<double>& probs) {
  double mx = s[0];
  for (int j = 1; j < k; ++j) mx = std::max(mx, s[j]);
  double sum = 0.0;
  probs.resize(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    probs[static_cast<size_t>(j)] = std::exp(s[j] - mx);
    sum += probs[static_cast<size_t>(j)];
  }
  for (int j = 0; j < k; ++j) probs[static_cast<size_t>(j)] /= sum;
  return std::log(sum) - (s[gt] - mx);
}

}  // namespace

Tensor cross_entropy_from_scores(const Tensor& scores, int gt_index) {
  require(scores.ndim() == 1, "cross_entropy_from_scores: expected 1-D scores, got " +
                                  shape_str(scores.shape()));
  require_finite(scores.values(), "cross_entropy_from_scores");
  const int k = scores.dim(0);
  require(gt_index >= 0 && gt_index < k, "cross_entropy_from_scores: index " +
                                             std::to_string(gt_index) + " out of range [0," +
                                             std::to_string(k) + ")");
  std::vector<double> probs;
  const double loss = ce_row(scores.values().data(), k, gt_index, probs);
  return Tensor::make_node({}, {loss}, {scores},
                           [k, gt_index, probs = std::move(probs)](TensorNode& self) {
                             TensorNode& sn = *self.parents[0];
                             if (!sn.requires_grad) return;
                             const double g = self.grad[0];
                             for (int j = 0; j < k; ++j) {
                               double p = probs[static_cast<size_t>(j)];
                               if (j == gt_index) p -= 1.0;
                               sn.grad[static_cast<size_t>(j)] += g * p;
                             }
                           });
}

Tensor cross_entropy_rows(const Tensor& scores, const std::vector<int>& gt_indices) {
  require(scores.ndim() == 2, "cross_entropy_rows: expected 2-D scores, got " +
                                  shape_str(scores.shape()));
  require_finite(scores.values(), "cross_entropy_rows");
  const int n = scores.dim(0), k = scores.dim(1);
  require(static_cast<int>(gt_indices.size()) == n,
          "cross_entropy_rows: " + std::to_string(gt_indices.size()) + " gold indices for " +
              std::to_string(n) + " rows");
  std::vector<double> all_probs(static_cast<size_t>(n) * k);
  double total = 0.0;
  std::vector<double> probs;
  for (int i = 0; i < n; ++i) {
    const int gt = gt_indices[static_cast<size_t>(i)];
    require(gt >= 0 && gt < k, "cross_entropy_rows: row " + std::to_string(i) + " index " +
                                   std::to_string(gt) + " out of range [0," + std::to_string(k) +
                                   ")");
    total += ce_row(scores.values().data() + static_cast<size_t>(i) * k, k, gt, probs);
    std::copy(probs.begin(), probs.end(), all_probs.begin() + static_cast<size_t>(i) * k);
  }
  return Tensor::make_node(
      {}, {total / n}, {scores},
      [n, k, gt_indices, all_probs = std::move(all_probs)](TensorNode& self) {
        TensorNode& sn = *self.parents[0];
        if (!sn.requires_grad) return;
        const double g = self.grad[0] / n;
        for (int i = 0; i < n; ++i) {
          double* sg = sn.grad.data() + static_cast<size_t>(i) * k;
          const double* p = all_probs.data() + static_cast<size_t>(i) * k;
          const int gt = gt_indices[static_cast<size_t>(i)];
          for (int j = 0; j < k; ++j) sg[j] += g * (p[j] - (j == gt ? 1.0 : 0.0));
        }
      });
}

Tensor mean_scalars(const std::vector<Tensor>& xs) {
  require(!xs.empty(), "mean_scalars: empty input");
  for (const Tensor& t : xs) require(t.numel() == 1, "mean_scalars: non-scalar input");
  double sum = 0.0;
  for (const Tensor& t : xs) sum += t.values()[0];
  const double inv = 1.0 / static_cast<double>(xs.size());
  return Tensor::make_node({}, {sum * inv}, xs, [inv](TensorNode& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad[0] += self.grad[0] * inv;
  });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_node({}, {s}, {x}, [](TensorNode& self) {
    TensorNode& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (size_t i = 0; i < xn.grad.size(); ++i) xn.grad[i] += self.grad[0];
  });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (rate == 0.0) return x;
  const double keep = 1.0 - rate;
  const auto& xv = x.values();
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.next_double() < rate ? 0.0 : 1.0 / keep;
    out[i] = xv[i] * mask[i];
  }
  return Tensor::make_node(x.shape(), std::move(out), {x}, [mask = std::move(mask)](TensorNode& self) {
    TensorNode& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i] * mask[i];
  });
}

}  // namespace splat
