#include "splat/grad_check.hpp"

#include <cmath>
#include <stdexcept>

#include "splat/rng.hpp"

namespace splat {

GradCheckResult grad_check(ParamStore& params, const std::function<Tensor(ParamStore&)>& f,
                           double eps, int max_coords, uint64_t seed, double denom_floor) {
  params.zero_grads();
  Tensor loss = f(params);
  if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite loss");
  loss.backward();

  // Snapshot analytic gradients before the finite-difference probes.
  std::map<std::string, std::vector<double>> analytic;
  std::vector<std::pair<std::string, int>> coords;
  for (auto& [path, t] : params.entries()) {
    analytic[path] = t.grad();
    for (int64_t i = 0; i < t.numel(); ++i) coords.emplace_back(path, static_cast<int>(i));
  }
  Rng rng(Rng::mix(seed, 0x6f72c1));
  rng.shuffle(coords);
  if (static_cast<int>(coords.size()) > max_coords) coords.resize(static_cast<size_t>(max_coords));

  GradCheckResult res;
  for (const auto& [path, idx] : coords) {
    std::vector<double>& v = params.at(path).mutable_values();
    const double saved = v[static_cast<size_t>(idx)];
    v[static_cast<size_t>(idx)] = saved + eps;
    const double up = f(params).item();
    v[static_cast<size_t>(idx)] = saved - eps;
    const double down = f(params).item();
    v[static_cast<size_t>(idx)] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("grad_check: non-finite loss during probe of '" + path + "'");
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[path][static_cast<size_t>(idx)];
    const double rel =
        std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), denom_floor});
    ++res.coords_checked;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_path = path;
      res.worst_index = idx;
      res.worst_analytic = a;
      res.worst_numeric = numeric;
    }
  }
  return res;
}

}  // namespace splat
