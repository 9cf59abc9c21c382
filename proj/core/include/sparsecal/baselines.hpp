// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "sparsecal/tensor.hpp"

namespace sparsecal {

/// Per-layer sparsity rates produced by a heuristic allocator.
struct AllocationResult {
  std::vector<double> rates;
  std::string method;
};

/// Element-weighted mean of `rates` with per-layer sizes taken from `shapes`.
double weighted_mean_rate(std::span<const double> rates, std::span<const Shape> shapes);

/// Same rate r_0 for every layer.
AllocationResult uniform_allocation(std::span<const Shape> shapes, double target);

/// Global magnitude cut on per-layer L2-normalized scores |w|/‖W_l‖₂: the
/// round(r_0·ΣN) lowest-scoring weights across the network are pruned and
/// each layer's rate is what the cut removes from it.
AllocationResult l2norm_global_allocation(std::span<const Tensor> weights, double target);

/// Erdős–Rényi-kernel allocation. Layer density is ε·(Σ dims)/(Π dims); ε is
/// solved so the element-weighted density equals 1 − r_0, with layers whose
/// density would exceed 1 kept dense and the budget re-spread over the rest.
/// Throws ContractError when no ε satisfies the target.
AllocationResult erk_allocation(std::span<const Shape> shapes, double target);

}  // namespace sparsecal
