// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparsecal/autodiff.hpp"
#include "sparsecal/tensor.hpp"

namespace sparsecal {

/// Per-layer sparsity rates with their sparsifiable element counts and the
/// global target.
struct GlobalSparsityState {
  std::vector<double> rates;
  std::vector<std::size_t> counts;
  double target = 0.5;

  /// Throws ContractError unless lengths agree, every count is ≥ 1, every
  /// rate is in [0,1] and the target is in (0,1).
  void validate() const;
};

/// Σ r_i N_i / Σ N_i
double weighted_rate(const GlobalSparsityState& state);

/// |weighted_rate − target|
double control_loss(const GlobalSparsityState& state);

/// ∂control_loss/∂r_layer: +N_l/ΣN above target, −N_l/ΣN below, 0 exactly at
/// the target.
double control_grad(const GlobalSparsityState& state, std::size_t layer);

/// Batch mean of KL(softmax(dense) ‖ softmax(sparse)) for [B×C] logits.
/// Throws NumericError on non-finite logits, DimensionError on mismatch.
double reconstruction_loss(const Tensor& dense_logits, const Tensor& sparse_logits);

/// Graph form: the dense logits are a frozen teacher, gradient flows only
/// into `sparse_logits`.
ad::Var reconstruction_loss(const Tensor& dense_logits, const ad::Var& sparse_logits);

/// L_rec + lambda_c · L_c
double total_loss(double reconstruction, double control, double lambda_c = 1.0);

/// Mean softmax cross-entropy against integer labels; used for dense training.
ad::Var cross_entropy(const ad::Var& logits, std::span<const std::uint8_t> labels);

}  // namespace sparsecal
