#pragma once

#include <map>
#include <string>
#include <vector>

#include "splat/param_store.hpp"

namespace splat {

// Linear warmup to max_lr over the first warmup_fraction of steps, then
// linear decay to zero at total_steps. Steps are 1-based.
struct LrSchedule {
  double max_lr = 1e-5;
  double warmup_fraction = 0.1;
  int total_steps = 1;

  int warmup_steps() const {
    const int w = static_cast<int>(warmup_fraction * total_steps);
    return w < 1 ? 1 : w;
  }

  double at(int step) const {
    const int w = warmup_steps();
    if (step <= w) return max_lr * static_cast<double>(step) / w;
    if (total_steps <= w) return max_lr;
    return max_lr * static_cast<double>(total_steps - step) / (total_steps - w);
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update with the given learning rate. Gradients are divided by
  // grad_scale (batch size) before the moment updates; the caller zeroes
  // them afterwards via ParamStore::zero_grads().
  void step(ParamStore& params, double lr, double grad_scale = 1.0);

  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace splat
