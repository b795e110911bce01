#include "attnseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace attnseg {

void Node::accumulate(const Tensor& g) {
  if (!grad.defined()) grad = Tensor::zeros(value.shape());
  check_shape(grad.same_shape(g), "gradient shape mismatch");
  Scalar* dst = grad.data();
  const Scalar* src = g.data();
  const long long n = g.size();
  for (long long i = 0; i < n; ++i) dst[i] += src[i];
}

Tensor& Node::grad_ref() {
  if (!grad.defined()) grad = Tensor::zeros(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> n) {
  Var v;
  v.node_ = std::move(n);
  return v;
}

Scalar Var::item() const {
  check_shape(node_->value.size() == 1, "item() on non-scalar");
  return node_->value[0];
}

void Var::backward() const {
  check_shape(node_->value.size() == 1, "backward() root must be scalar");
  // iterative topological sort
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({node_.get(), 0});
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i == 0 && visited.count(n)) {
      stack.pop_back();
      continue;
    }
    if (i < n->parents.size()) {
      Node* p = n->parents[i].get();
      ++i;
      if (!visited.count(p) && p->requires_grad) stack.push_back({p, 0});
    } else {
      visited.insert(n);
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad = Tensor::full(node_->value.shape(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.defined()) n->backprop(*n);
  }
}

GradCheckResult grad_check(const std::function<Var()>& f, std::vector<Var> inputs,
                           double eps) {
  Var root = f();
  root.backward();
  std::vector<Tensor> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs)
    analytic.push_back(in.has_grad() ? in.grad().clone() : Tensor::zeros(in.shape()));

  GradCheckResult res;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor& v = inputs[k].mutable_value();
    for (long long i = 0; i < v.size(); ++i) {
      const Scalar orig = v[i];
      v[i] = orig + eps;
      const Scalar fp = f().item();
      v[i] = orig - eps;
      const Scalar fm = f().item();
      v[i] = orig;
      const double fd = (fp - fm) / (2 * eps);
      const double ad = analytic[k][i];
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
      const double rel = std::abs(fd - ad) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_index = (long long)(k * 1000000 + i);
      }
    }
  }
  return res;
}

}  // namespace attnseg
