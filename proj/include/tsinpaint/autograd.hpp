// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode automatic differentiation over Tensor.
//
// Every differentiable op produces a Var whose node remembers its parents and
// a closure that pushes the node's gradient into them. backward() walks the
// graph once in reverse topological order. Graphs are freed when the last Var
// referencing them goes out of scope; parameters are long-lived leaf nodes.

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "tsinpaint/tensor.hpp"

namespace tsi {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialized on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;

  /// Leaf that never receives gradients.
  static Var constant(Tensor value);
  /// Leaf that accumulates gradients (a parameter or a probed input).
  static Var leaf(Tensor value, bool requires_grad = true);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Tensor& value() const { return node_->value; }
  /// In-place access for optimizers and checkpoint loading.
  [[nodiscard]] Tensor& mutable_value() { return node_->value; }
  [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }

  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; a zero tensor when nothing has flowed in yet.
  [[nodiscard]] Tensor grad() const;
  void zero_grad();

  [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  /// Same value, cut from the graph.
  [[nodiscard]] Var detach() const { return constant(node_->value); }

  [[nodiscard]] Node* node() const { return node_.get(); }
  [[nodiscard]] const std::shared_ptr<Node>& shared() const { return node_; }

  static Var from_node(std::shared_ptr<Node> node) { return Var(std::move(node)); }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

/// Records an op output. When grad mode is off or no parent requires a
/// gradient the result is a plain constant and `fn` is dropped.
Var make_result(Tensor value, std::initializer_list<Var> parents, std::function<void(Node&)> fn);
Var make_result(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> fn);

/// Accumulates d(root)/d(leaf) into every reachable leaf. `root` must hold one element.
void backward(const Var& root);

[[nodiscard]] bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace tsi
