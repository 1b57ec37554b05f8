// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cosal/core/tensor.hpp"

namespace cosal {

/// Thread-local switch for gradient recording (mirrors the usual
/// no-grad/inference-mode idiom). Forward passes under NoGradGuard build no
/// graph, so intermediates are freed as soon as they go out of scope.
struct GradMode {
  static bool& enabled() {
    thread_local bool on = true;
    return on;
  }
};

struct NoGradGuard {
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::enabled() = false; }
  ~NoGradGuard() { GradMode::enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class Variable;

template <typename T>
struct GradNode {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<GradNode>> inputs;
  std::function<void(GradNode&)> backward_op;  // reads grad, pushes into inputs
};

/// Reverse-mode autodiff handle: a shared node holding a value, an optional
/// gradient, and the closure that propagates to its inputs. Graphs are built
/// dynamically by the free-function ops in ops.hpp / conv.hpp.
template <typename T>
class Variable {
 public:
  using Node = GradNode<T>;

  Variable() = default;

  explicit Variable(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value() { return node_->value; }

  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return node_ && node_->grad.defined(); }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() {
    if (!node_->grad.defined()) node_->grad = zeros_like(node_->value);
    return node_->grad;
  }

  // Variable is a shared handle onto its node, so graph mutation is const
  // with respect to the handle (closures capture handles by value).
  void zero_grad() const {
    if (node_) node_->grad = Tensor<T>();
  }

  void accumulate_grad(const Tensor<T>& g) const {
    if (!node_->requires_grad) return;
    if (!node_->grad.defined()) {
      node_->grad = g;
    } else {
      node_->grad.add_(g);
    }
  }

  void accumulate_grad(Tensor<T>&& g) const {
    if (!node_->requires_grad) return;
    if (!node_->grad.defined()) {
      node_->grad = std::move(g);
    } else {
      node_->grad.add_(g);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

  /// Backpropagate from this (scalar) variable through the recorded graph.
  void backward() {
    check(node_ != nullptr, "backward() on undefined variable");
    check(node_->value.numel() == 1, "backward() requires a scalar root, got ",
          shape_str(node_->value.shape()));
    // Topological order: every node appears after all of its inputs.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    struct Frame {
      Node* node;
      std::size_t next_input;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_input < f.node->inputs.size()) {
        Node* child = f.node->inputs[f.next_input++].get();
        if (child->requires_grad && visited.insert(child).second) {
          stack.push_back({child, 0});
        }
      } else {
        topo.push_back(f.node);
        stack.pop_back();
      }
    }
    node_->grad = ones_like(node_->value);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      Node* n = *it;
      if (n->backward_op && n->grad.defined()) n->backward_op(*n);
    }
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Wrap an op result. Records the graph edge and backward closure only when
/// grad mode is on and at least one input requires grad.
template <typename T, typename BackwardFn>
Variable<T> make_op(Tensor<T> value, std::vector<Variable<T>> inputs, BackwardFn&& backward) {
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& v : inputs)
      if (v.requires_grad()) {
        needs = true;
        break;
      }
  }
  Variable<T> out(std::move(value), needs);
  if (needs) {
    auto node = out.node();
    node->inputs.reserve(inputs.size());
    for (const auto& v : inputs) node->inputs.push_back(v.node());
    node->backward_op = std::forward<BackwardFn>(backward);
  }
  return out;
}

}  // namespace cosal
