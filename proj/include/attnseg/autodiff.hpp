#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "attnseg/tensor.hpp"

namespace attnseg {

// Reverse-mode tape. Graphs are DAGs of Nodes built by the ops in ops.hpp;
// Var is a shared handle. Leaves with requires_grad=true are parameters.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backprop;

  void accumulate(const Tensor& g);
  Tensor& grad_ref();  // allocates zeros if missing
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.defined(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  const std::vector<int>& shape() const { return node_->value.shape(); }

  // Scalar convenience for [1] tensors.
  Scalar item() const;

  // Value copy cut off from the graph.
  Var detach() const { return Var(node_->value, false); }

  // Reverse pass from a scalar root.
  void backward() const;

  void zero_grad() { node_->grad = Tensor(); }

  std::shared_ptr<Node> node() const { return node_; }
  static Var from_node(std::shared_ptr<Node> n);

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }

// Central-difference gradient check utility (test support, but kept in the
// library so the acceptance suite can reuse it).
struct GradCheckResult {
  double max_rel_err = 0.0;
  long long worst_index = -1;
  bool ok(double tol) const { return max_rel_err <= tol; }
};

// f: builds a fresh scalar graph from the current values of `inputs`.
// Compares autodiff gradients of every input against central differences.
GradCheckResult grad_check(const std::function<Var()>& f, std::vector<Var> inputs,
                           double eps = 1e-4);

}  // namespace attnseg
