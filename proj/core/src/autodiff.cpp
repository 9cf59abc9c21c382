// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "sparsecal/error.hpp"

namespace sparsecal::ad {

Node& node_of(const Var& v) {
  if (!v.node_) throw ContractError("use of an undefined Var");
  return *v.node_;
}

const Tensor& Var::value() const { return node_of(*this).value; }

const Tensor& Var::grad() const {
  Node& n = node_of(*this);
  n.ensure_grad();
  return n.grad;
}

bool Var::requires_grad() const { return node_of(*this).requires_grad; }

Tensor& Var::mutable_value() {
  Node& n = node_of(*this);
  if (!n.leaf) throw ContractError("only leaf values may be modified in place");
  return n.value;
}

void Var::zero_grad() {
  Node& n = node_of(*this);
  if (!n.grad.empty()) n.grad.fill(0.0);
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> propagate) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  for (auto& p : parents) {
    if (!p.defined()) continue;
    node->requires_grad = node->requires_grad || p.node_->requires_grad;
    node->parents.push_back(p.node_);
  }
  if (node->requires_grad) node->propagate = std::move(propagate);
  return Var(std::move(node));
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

void backward(const Var& root) {
  Node& top = node_of(root);
  if (top.value.size() != 1) {
    throw ContractError("backward() needs a scalar root, got shape " + to_string(top.value.shape()));
  }
  if (!top.requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&top, 0}};
  seen.insert(&top);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    n->ensure_grad();
    if (!n->leaf) n->grad.fill(0.0);
  }
  top.grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->propagate) n->propagate(*n);
  }
}

namespace {

Tensor& parent_grad(Node& n, std::size_t i) {
  Node& p = *n.parents[i];
  p.ensure_grad();
  return p.grad;
}

bool wants_grad(const Node& n, std::size_t i) { return n.parents.size() > i && n.parents[i]->requires_grad; }

enum class Broadcast { same, scalar, row };

Broadcast broadcast_kind(const Tensor& big, const Tensor& small) {
  if (big.shape() == small.shape()) return Broadcast::same;
  if (small.size() == 1) return Broadcast::scalar;
  if (small.rank() == 1 && small.size() == big.shape().back()) return Broadcast::row;
  throw DimensionError("cannot broadcast " + to_string(small.shape()) + " against " + to_string(big.shape()));
}

// Index of the broadcast operand element paired with big element i.
std::size_t small_index(Broadcast kind, std::size_t i, std::size_t row_len) {
  switch (kind) {
    case Broadcast::same:
      return i;
    case Broadcast::scalar:
      return 0;
    case Broadcast::row:
      return i % row_len;
  }
  return i;
}

template <typename Forward, typename GradA, typename GradB>
Var binary(const Var& a, const Var& b, Forward forward, GradA grad_a, GradB grad_b) {
  const bool swap = a.value().size() < b.value().size();
  const Tensor& big = swap ? b.value() : a.value();
  const Tensor& small = swap ? a.value() : b.value();
  const Broadcast kind = broadcast_kind(big, small);
  const std::size_t row_len = big.shape().back();

  Tensor out(big.shape());
  for (std::size_t i = 0; i < big.size(); ++i) {
    const std::size_t j = small_index(kind, i, row_len);
    out[i] = swap ? forward(small[j], big[i]) : forward(big[i], small[j]);
  }
  return make_node(std::move(out), {a, b}, [=](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    const bool a_big = !swap;
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      const std::size_t j = small_index(kind, i, row_len);
      const std::size_t ia = a_big ? i : j;
      const std::size_t ib = a_big ? j : i;
      const double g = n.grad[i];
      if (wants_grad(n, 0)) parent_grad(n, 0)[ia] += grad_a(g, av[ia], bv[ib]);
      if (wants_grad(n, 1)) parent_grad(n, 1)[ib] += grad_b(g, av[ia], bv[ib]);
    }
  });
}

template <typename Forward, typename Derivative>
Var unary(const Var& a, Forward forward, Derivative derivative) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  return make_node(std::move(out), {a}, [=](Node& n) {
    const Tensor& xv = n.parents[0]->value;
    Tensor& gx = parent_grad(n, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += n.grad[i] * derivative(xv[i], n.value[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul " + to_string(av.shape()) + " by " + to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::gemm_nn(m, k, n, av.raw(), bv.raw(), out.raw());
  return make_node(std::move(out), {a, b}, [m, k, n](Node& node) {
    const Tensor& g = node.grad;
    if (wants_grad(node, 0)) kernels::gemm_nt(m, n, k, g.raw(), node.parents[1]->value.raw(), parent_grad(node, 0).raw());
    if (wants_grad(node, 1)) kernels::gemm_tn(k, m, n, node.parents[0]->value.raw(), g.raw(), parent_grad(node, 1).raw());
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) {
    throw DimensionError("linear input " + to_string(xv.shape()) + " with weight " + to_string(wv.shape()));
  }
  const std::size_t batch = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
  if (bias.defined() && bias.value().size() != out_dim) {
    throw DimensionError("linear bias " + to_string(bias.value().shape()) + " for " + std::to_string(out_dim) + " outputs");
  }
  Tensor out({batch, out_dim});
  kernels::gemm_nt(batch, in, out_dim, xv.raw(), wv.raw(), out.raw());
  if (bias.defined()) {
    const Tensor& bv = bias.value();
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t o = 0; o < out_dim; ++o) out[r * out_dim + o] += bv[o];
  }
  return make_node(std::move(out), {x, weight, bias}, [batch, in, out_dim](Node& n) {
    const Tensor& g = n.grad;
    if (wants_grad(n, 0)) kernels::gemm_nn(batch, out_dim, in, g.raw(), n.parents[1]->value.raw(), parent_grad(n, 0).raw());
    if (wants_grad(n, 1)) kernels::gemm_tn(out_dim, batch, in, g.raw(), n.parents[0]->value.raw(), parent_grad(n, 1).raw());
    if (wants_grad(n, 2)) {
      Tensor& gb = parent_grad(n, 2);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[r * out_dim + o];
    }
  });
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, Conv2dParams params) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  if (params.stride == 0) throw ParameterError("conv2d stride must be at least 1");
  if (xv.rank() != 3 && xv.rank() != 4) throw DimensionError("conv2d input must be [C,H,W] or [N,C,H,W], got " + to_string(xv.shape()));
  if (kv.rank() != 4) throw DimensionError("conv2d kernel must be [Cout,Cin,kh,kw], got " + to_string(kv.shape()));
  const bool batched = xv.rank() == 4;
  const std::size_t batch = batched ? xv.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  kernels::ConvGeometry geo{xv.dim(off), xv.dim(off + 1), xv.dim(off + 2), kv.dim(2), kv.dim(3), params.stride, params.padding};
  if (kv.dim(1) != geo.channels) {
    throw DimensionError("conv2d kernel expects " + std::to_string(kv.dim(1)) + " input channels, got " + std::to_string(geo.channels));
  }
  if (geo.kernel_h > geo.height + 2 * geo.padding || geo.kernel_w > geo.width + 2 * geo.padding) {
    throw ParameterError("conv2d kernel " + to_string(kv.shape()) + " exceeds padded input " + to_string(xv.shape()));
  }
  const std::size_t cout = kv.dim(0);
  if (bias.defined() && bias.value().size() != cout) throw DimensionError("conv2d bias must have one entry per output channel");

  const std::size_t oh = geo.out_h(), ow = geo.out_w(), spatial = oh * ow, patch = geo.patch();
  const std::size_t in_stride = geo.channels * geo.height * geo.width;
  Shape out_shape = batched ? Shape{batch, cout, oh, ow} : Shape{cout, oh, ow};
  Tensor out(out_shape);
  std::vector<double> cols(patch * spatial);
  for (std::size_t s = 0; s < batch; ++s) {
    kernels::im2col(geo, xv.raw() + s * in_stride, cols.data());
    double* y = out.raw() + s * cout * spatial;
    kernels::gemm_nn(cout, patch, spatial, kv.raw(), cols.data(), y);
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t i = 0; i < spatial; ++i) y[c * spatial + i] += bias.value()[c];
    }
  }
  return make_node(std::move(out), {x, kernel, bias}, [=](Node& n) {
    const Tensor& g = n.grad;
    const Tensor& input = n.parents[0]->value;
    const Tensor& k = n.parents[1]->value;
    std::vector<double> columns(patch * spatial), gcols(patch * spatial);
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gy = g.raw() + s * cout * spatial;
      if (wants_grad(n, 1)) {
        kernels::im2col(geo, input.raw() + s * in_stride, columns.data());
        kernels::gemm_nt(cout, spatial, patch, gy, columns.data(), parent_grad(n, 1).raw());
      }
      if (wants_grad(n, 0)) {
        std::fill(gcols.begin(), gcols.end(), 0.0);
        kernels::gemm_tn(patch, cout, spatial, k.raw(), gy, gcols.data());
        kernels::col2im(geo, gcols.data(), parent_grad(n, 0).raw() + s * in_stride);
      }
      if (wants_grad(n, 2)) {
        Tensor& gb = parent_grad(n, 2);
        for (std::size_t c = 0; c < cout; ++c)
          for (std::size_t i = 0; i < spatial; ++i) gb[c] += gy[c * spatial + i];
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var softmax(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.raw() + r * cols;
    double* y = out.raw() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (y[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
  return make_node(std::move(out), {a}, [rows, cols](Node& n) {
    Tensor& gx = parent_grad(n, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = n.value.raw() + r * cols;
      const double* g = n.grad.raw() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (g[c] - dot);
    }
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_node(Tensor::scalar(total), {a}, [](Node& n) {
    Tensor& gx = parent_grad(n, 0);
    const double g = n.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_node(Tensor::scalar(total / count), {a}, [count](Node& n) {
    Tensor& gx = parent_grad(n, 0);
    const double g = n.grad[0] / count;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_node(std::move(out), {a}, [](Node& n) {
    Tensor& gx = parent_grad(n, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i];
  });
}

}  // namespace sparsecal::ad
