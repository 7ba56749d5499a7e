#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace splat {

struct TensorNode;

// Value-semantic handle to a node of a dynamically built reverse-mode graph.
// Node values are immutable once produced by an operation; only leaf tensors
// (parameters) may be mutated, through mutable_values().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int dim(int i) const { return shape()[static_cast<size_t>(i)]; }
  int64_t numel() const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // leaf tensors only
  double item() const;                    // numel()==1 only

  bool requires_grad() const;
  const std::vector<double>& grad() const;  // valid after backward()
  void zero_grad();

  // Reverse pass from a scalar root. Parameter gradients accumulate across
  // calls until explicitly zeroed, so batched losses can sum their pulls.
  void backward();

  // Graph plumbing for op implementations.
  static Tensor make_node(std::vector<int> shape, std::vector<double> value,
                          std::vector<Tensor> parents,
                          std::function<void(TensorNode&)> backward_fn);
  TensorNode* node() const { return n_.get(); }

 private:
  std::shared_ptr<TensorNode> n_;
};

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace splat
