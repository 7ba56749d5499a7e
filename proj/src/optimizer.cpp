#include "splat/optimizer.hpp"

#include <cmath>

namespace splat {

void Adam::step(ParamStore& params, double lr, double grad_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& [path, t] : params.entries()) {
    const std::vector<double>& g = t.grad();
    std::vector<double>& m = m_[path];
    std::vector<double>& v = v_[path];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    std::vector<double>& w = t.mutable_values();
    for (size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i] / grad_scale;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace splat
