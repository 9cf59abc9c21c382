// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "sparsecal/model.hpp"
#include "sparsecal/tensor.hpp"

namespace sparsecal {

struct MaskSpec {
  std::string layer;
  double threshold = 0.0;
  Tensor mask;
};

/// M = 0.5·sgn(|W| − t) + 0.5 with sgn(0) = −1: keeps |w| > t, prunes ties.
Tensor gen_mask(const Tensor& weights, double threshold);
MaskSpec make_mask_spec(const std::string& layer, const Tensor& weights, double threshold);

/// Fraction of zero entries in a binary mask.
double mask_sparsity(const Tensor& mask);

/// Forward pass with every weight tensor replaced by M ⊙ W. Biases are never
/// masked. With all-ones masks the result is bit-identical to the dense pass.
Tensor masked_forward(const Model& model, const Tensor& input, std::span<const MaskSpec> masks);

/// Smoothed ∂M/∂t: −φ((|W| − t)/h)/h elementwise. The hard mask's derivative
/// is zero almost everywhere; this Gaussian-smoothed Dirac stands in for it.
Tensor grad_mask_wrt_t(const Tensor& weights, double threshold, double window);

/// Gradient reaching W through M ⊙ W: upstream ⊙ M.
Tensor grad_weights_through_mask(const Tensor& upstream, const Tensor& mask);

/// Elementwise product of same-shape tensors.
Tensor hadamard(const Tensor& a, const Tensor& b);

}  // namespace sparsecal
