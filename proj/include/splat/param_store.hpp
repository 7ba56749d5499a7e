#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splat/tensor.hpp"

namespace splat {

enum class Init { TruncNormal, Zeros, Ones };

// Named map of trainable parameters. Each parameter's initial values are
// drawn from a stream derived from (store seed, parameter path), so
// re-initialization with the same seed is bit-identical regardless of
// creation order.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  Tensor& create(const std::string& path, std::vector<int> shape, Init init,
                 double stddev = 0.02);
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool contains(const std::string& path) const { return params_.count(path) > 0; }

  void zero_grads();
  int64_t total_coords() const;
  uint64_t seed() const { return seed_; }
  size_t size() const { return params_.size(); }

  std::map<std::string, Tensor>& entries() { return params_; }
  const std::map<std::string, Tensor>& entries() const { return params_; }

  // Versioned little-endian binary format (magic + path/shape/float64 rows).
  void save(const std::string& file) const;
  static ParamStore load(const std::string& file);

 private:
  uint64_t seed_;
  std::map<std::string, Tensor> params_;
};

}  // namespace splat
