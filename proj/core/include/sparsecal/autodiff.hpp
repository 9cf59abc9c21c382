// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sparsecal/tensor.hpp"

namespace sparsecal::ad {

struct Node;

/// Handle to a node of a dynamically built reverse-mode graph.
///
/// Graphs are built eagerly: every op computes its forward value
/// immediately and records a closure that propagates gradients to its
/// parents. Handles are cheap to copy and share ownership of the node, so
/// a graph lives as long as any handle to its root. There is no global
/// state; independent graphs may be built on different threads.
class Var {
 public:
  Var() = default;

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const;
  /// Accumulated gradient; zero-filled until a backward pass reaches it.
  const Tensor& grad() const;
  bool requires_grad() const;
  const Shape& shape() const { return value().shape(); }

  /// Mutable access to a leaf's value, for in-place optimizer updates.
  Tensor& mutable_value();
  void zero_grad();

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;

  friend Var make_node(Tensor, std::vector<Var>, std::function<void(Node&)>);
  friend Var parameter(Tensor);
  friend Var constant(Tensor);
  friend void backward(const Var&);
  friend Node& node_of(const Var&);
};

struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> propagate;
  bool requires_grad = false;
  bool leaf = true;

  void ensure_grad() {
    if (grad.empty()) grad = Tensor(value.shape());
  }
};

Node& node_of(const Var& v);

/// Builds an interior node. `propagate` receives the node itself and must add
/// the node's gradient contribution into each parent that requires it.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> propagate);

/// Trainable leaf.
Var parameter(Tensor value);
/// Leaf that never receives gradient.
Var constant(Tensor value);

/// Fills every reachable leaf with d(root)/d(leaf), adding into existing leaf
/// gradients. Interior gradients are reset on each call, so
/// `zero_grad(leaves); backward(root)` is repeatable.
void backward(const Var& root);

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// [m×k]·[k×n]
Var matmul(const Var& a, const Var& b);
/// x[B×in]·Wᵀ + b with W stored [out×in]; `bias` may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);
/// Cross-correlation with zero padding. x is [C×H×W] or [N×C×H×W],
/// kernel is [C_out×C_in×kh×kw], bias (optional) is [C_out].
Var conv2d(const Var& x, const Var& kernel, const Var& bias, Conv2dParams params);

/// Elementwise; `b` may also be a scalar or a per-row vector of length
/// a.shape().back(). Either operand may be the broadcast one.
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var relu(const Var& a);
/// Throws DomainError on any non-positive entry.
Var log(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);
/// Softmax along the last axis.
Var softmax(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);

}  // namespace sparsecal::ad
