#include "splat/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace splat {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                     requires_grad);
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw std::runtime_error("tensor: shape " + shape_str(shape) + " does not match value count " +
                             std::to_string(values.size()));
  Tensor t;
  t.n_ = std::make_shared<TensorNode>();
  t.n_->shape = std::move(shape);
  t.n_->value = std::move(values);
  t.n_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return from_values({}, {v}); }

const std::vector<int>& Tensor::shape() const { return n_->shape; }

int64_t Tensor::numel() const { return shape_numel(n_->shape); }

const std::vector<double>& Tensor::values() const { return n_->value; }

std::vector<double>& Tensor::mutable_values() {
  if (!n_->is_leaf)
    throw std::runtime_error("tensor: only leaf tensors may be mutated");
  return n_->value;
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::runtime_error("tensor: item() on non-scalar shape " + shape_str(n_->shape));
  return n_->value[0];
}

bool Tensor::requires_grad() const { return n_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
  if (!n_->requires_grad)
    throw std::runtime_error("tensor: grad() on a tensor that does not require gradients");
  const_cast<TensorNode*>(n_.get())->ensure_grad();
  return n_->grad;
}

void Tensor::zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }

Tensor Tensor::make_node(std::vector<int> shape, std::vector<double> value,
                         std::vector<Tensor> parents,
                         std::function<void(TensorNode&)> backward_fn) {
  Tensor t = from_values(std::move(shape), std::move(value));
  t.n_->is_leaf = false;
  bool needs = false;
  for (const Tensor& p : parents) {
    if (p.defined() && p.requires_grad()) needs = true;
  }
  if (needs) {
    t.n_->requires_grad = true;
    t.n_->parents.reserve(parents.size());
    for (const Tensor& p : parents) t.n_->parents.push_back(p.n_);
    t.n_->backward_fn = std::move(backward_fn);
  }
  return t;
}

void Tensor::backward() {
  if (numel() != 1)
    throw std::runtime_error("tensor: backward() requires a scalar root, got shape " +
                             shape_str(n_->shape));
  if (!n_->requires_grad) return;

  // Iterative DFS topological order over the parent DAG.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  visited.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorNode* node : topo) node->ensure_grad();
  n_->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

}  // namespace splat
