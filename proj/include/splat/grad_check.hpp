#pragma once

#include <functional>
#include <string>

#include "splat/param_store.hpp"

namespace splat {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int coords_checked = 0;
  std::string worst_path;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares the analytic gradient of a deterministic scalar-valued function of
// the parameters against central finite differences on a random coordinate
// subset. rel err per coordinate = |a - n| / max(|a|, |n|, denom_floor).
GradCheckResult grad_check(ParamStore& params,
                           const std::function<Tensor(ParamStore&)>& f, double eps,
                           int max_coords = 200, uint64_t seed = 0,
                           double denom_floor = 1e-6);

}  // namespace splat
