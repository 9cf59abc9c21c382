// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/masking.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sparsecal/error.hpp"
#include "sparsecal/kde.hpp"

namespace sparsecal {

Tensor gen_mask(const Tensor& weights, double threshold) {
  if (!(threshold >= 0.0)) throw ContractError("mask threshold must be non-negative");
  Tensor mask(weights.shape());
  for (std::size_t i = 0; i < weights.size(); ++i) mask[i] = std::fabs(weights[i]) - threshold > 0.0 ? 1.0 : 0.0;
  return mask;
}

MaskSpec make_mask_spec(const std::string& layer, const Tensor& weights, double threshold) {
  return {layer, threshold, gen_mask(weights, threshold)};
}

double mask_sparsity(const Tensor& mask) {
  if (mask.empty()) return 0.0;
  const auto zeros = std::count(mask.data().begin(), mask.data().end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(mask.size());
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor masked_forward(const Model& model, const Tensor& input, std::span<const MaskSpec> masks) {
  if (masks.size() != model.weights.size()) {
    throw ContractError("expected " + std::to_string(model.weights.size()) + " masks, got " + std::to_string(masks.size()));
  }
  std::vector<Tensor> effective;
  effective.reserve(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!masks[i].mask.same_shape(model.weights[i])) {
      throw ContractError("mask for layer " + model.spec.layers[i].name + " has shape " +
                          to_string(masks[i].mask.shape()) + ", weight is " + to_string(model.weights[i].shape()));
    }
    effective.push_back(hadamard(model.weights[i], masks[i].mask));
  }
  return forward(model.spec, input, effective, model.biases);
}

Tensor grad_mask_wrt_t(const Tensor& weights, double threshold, double window) {
  if (!(window > 0.0)) throw ContractError("mask gradient window must be positive");
  Tensor out(weights.shape());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = -std_normal_pdf((std::fabs(weights[i]) - threshold) / window) / window;
  }
  return out;
}

Tensor grad_weights_through_mask(const Tensor& upstream, const Tensor& mask) {
  if (!upstream.same_shape(mask)) throw ContractError("upstream gradient and mask differ in shape");
  return hadamard(upstream, mask);
}

}  // namespace sparsecal
