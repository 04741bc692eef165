// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/autograd.hpp"

#include <unordered_set>

#include "tsinpaint/error.hpp"

namespace tsi {
namespace {

thread_local bool g_grad_enabled = true;

template <typename Parents>
Var record(Tensor value, const Parents& parents, std::function<void(Node&)> fn) {
  bool any = false;
  if (g_grad_enabled) {
    for (const Var& p : parents) any = any || p.requires_grad();
  }
  if (!any) return Var::constant(std::move(value));
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (const Var& p : parents) node->parents.push_back(p.shared());
  node->backward_fn = std::move(fn);
  return Var::from_node(std::move(node));
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
  return node_->grad;
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

Var make_result(Tensor value, std::initializer_list<Var> parents, std::function<void(Node&)> fn) {
  return record(std::move(value), parents, std::move(fn));
}

Var make_result(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> fn) {
  return record(std::move(value), parents, std::move(fn));
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw InputError("backward() needs a scalar root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up parents-before-children.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Interior gradients are not needed after the sweep.
  for (Node* node : order) {
    if (node->backward_fn) node->grad = Tensor();
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace tsi
