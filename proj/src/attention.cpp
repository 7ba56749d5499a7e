#include "splat/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace splat {

namespace {

std::vector<int> global_positions(const GlobalMask& mask) {
  std::vector<int> g;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) g.push_back(static_cast<int>(i));
  return g;
}

// Allowed key positions for query i, ascending, no duplicates: the globals
// below the window, the window itself, the globals above. A global query
// sees everything.
void allowed_keys(int i, int n, int w, const std::vector<int>& globals, bool i_global,
                  std::vector<int>& out) {
  out.clear();
  if (i_global) {
    out.reserve(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) out.push_back(j);
    return;
  }
  const int lo = i - w < 0 ? 0 : i - w;
  const int hi = i + w >= n ? n - 1 : i + w;
  size_t gi = 0;
  while (gi < globals.size() && globals[gi] < lo) out.push_back(globals[gi++]);
  for (int j = lo; j <= hi; ++j) out.push_back(j);
  while (gi < globals.size() && globals[gi] <= hi) ++gi;
  while (gi < globals.size()) out.push_back(globals[gi++]);
}

}  // namespace

int64_t attention_score_count(int n, int window_w, int n_global) {
  GlobalMask mask(static_cast<size_t>(n), 0);
  for (int i = 0; i < n_global; ++i) mask[static_cast<size_t>(i)] = 1;
  const std::vector<int> globals = global_positions(mask);
  std::vector<int> keys;
  int64_t count = 0;
  for (int i = 0; i < n; ++i) {
    allowed_keys(i, n, window_w, globals, mask[static_cast<size_t>(i)] != 0, keys);
    count += static_cast<int64_t>(keys.size());
  }
  return count;
}

Tensor windowed_global_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const GlobalMask& global_mask, int window_w, int n_heads) {
  if (q.ndim() != 2 || q.shape() != k.shape() || q.shape() != v.shape())
    throw std::runtime_error("attention: q/k/v shapes must match, got " + shape_str(q.shape()) +
                             ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
  const int n = q.dim(0), d = q.dim(1);
  if (static_cast<int>(global_mask.size()) != n)
    throw std::runtime_error("attention: global mask length " +
                             std::to_string(global_mask.size()) + " != sequence length " +
                             std::to_string(n));
  if (window_w < 0) throw std::runtime_error("attention: negative window");
  if (n_heads < 1 || d % n_heads != 0)
    throw std::runtime_error("attention: width " + std::to_string(d) +
                             " not divisible by n_heads " + std::to_string(n_heads));
  const int dh = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::vector<int> globals = global_positions(global_mask);

  const double* qv = q.values().data();
  const double* kv = k.values().data();
  const double* vv = v.values().data();
  std::vector<double> out(static_cast<size_t>(n) * d, 0.0);
  // Probabilities saved flat per (head, query) for the backward pass; the
  // allowed sets are recomputed there from the same enumeration.
  std::vector<double> probs;
  std::vector<int> keys;
  std::vector<double> scores;
  for (int h = 0; h < n_heads; ++h) {
    const int col = h * dh;
    for (int i = 0; i < n; ++i) {
      allowed_keys(i, n, window_w, globals, global_mask[static_cast<size_t>(i)] != 0, keys);
      const double* qi = qv + static_cast<size_t>(i) * d + col;
      scores.resize(keys.size());
      double mx = -1e300;
      for (size_t a = 0; a < keys.size(); ++a) {
        const double* kj = kv + static_cast<size_t>(keys[a]) * d + col;
        double s = 0.0;
        for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
        s *= inv_sqrt;
        scores[a] = s;
        if (s > mx) mx = s;
      }
      double sum = 0.0;
      for (double& s : scores) {
        s = std::exp(s - mx);
        sum += s;
      }
      double* o = out.data() + static_cast<size_t>(i) * d + col;
      for (size_t a = 0; a < keys.size(); ++a) {
        const double p = scores[a] / sum;
        probs.push_back(p);
        const double* vj = vv + static_cast<size_t>(keys[a]) * d + col;
        for (int c = 0; c < dh; ++c) o[c] += p * vj[c];
      }
    }
  }

  return Tensor::make_node(
      q.shape(), std::move(out), {q, k, v},
      [n, d, dh, n_heads, window_w, inv_sqrt, globals, global_mask,
       probs = std::move(probs)](TensorNode& self) {
        TensorNode& qn = *self.parents[0];
        TensorNode& kn = *self.parents[1];
        TensorNode& vn = *self.parents[2];
        std::vector<int> keys;
        std::vector<double> gp;
        size_t pofs = 0;
        for (int h = 0; h < n_heads; ++h) {
          const int col = h * dh;
          for (int i = 0; i < n; ++i) {
            allowed_keys(i, n, window_w, globals, global_mask[static_cast<size_t>(i)] != 0, keys);
            const double* p = probs.data() + pofs;
            pofs += keys.size();
            const double* go = self.grad.data() + static_cast<size_t>(i) * d + col;
            const double* qi = qn.value.data() + static_cast<size_t>(i) * d + col;
            gp.resize(keys.size());
            double dot = 0.0;
            for (size_t a = 0; a < keys.size(); ++a) {
              const int j = keys[a];
              const double* vj = vn.value.data() + static_cast<size_t>(j) * d + col;
              double acc = 0.0;
              for (int c = 0; c < dh; ++c) acc += go[c] * vj[c];
              gp[a] = acc;
              dot += p[a] * acc;
              if (vn.requires_grad) {
                double* vg = vn.grad.data() + static_cast<size_t>(j) * d + col;
                for (int c = 0; c < dh; ++c) vg[c] += p[a] * go[c];
              }
            }
            double* qg = qn.requires_grad
                             ? qn.grad.data() + static_cast<size_t>(i) * d + col
                             : nullptr;
            for (size_t a = 0; a < keys.size(); ++a) {
              const int j = keys[a];
              const double gs = p[a] * (gp[a] - dot) * inv_sqrt;
              if (gs == 0.0) continue;
              if (qg) {
                const double* kj = kn.value.data() + static_cast<size_t>(j) * d + col;
                for (int c = 0; c < dh; ++c) qg[c] += gs * kj[c];
              }
              if (kn.requires_grad) {
                double* kg = kn.grad.data() + static_cast<size_t>(j) * d + col;
                for (int c = 0; c < dh; ++c) kg[c] += gs * qi[c];
              }
            }
          }
        }
      });
}

}  // namespace splat
