// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparsecal/autodiff.hpp"
#include "sparsecal/dataset.hpp"
#include "sparsecal/tensor.hpp"

namespace sparsecal {

enum class Arch { mlp_3x256, cnn_2conv_2fc };

std::string to_string(Arch arch);
/// Throws ConfigError for unknown tags.
Arch parse_arch(std::string_view tag);

enum class LayerKind { dense, conv };

/// One weight-bearing layer. Dense weights are [out×in]; conv kernels are
/// [C_out×C_in×kh×kw]. Every layer has a bias; all but the last apply ReLU.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::dense;
  Shape weight_shape;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool relu = true;

  std::size_t out_features() const { return weight_shape.front(); }
};

struct ModelSpec {
  Arch arch = Arch::mlp_3x256;
  Shape input_shape{1, 28, 28};
  std::size_t classes = kClassCount;
  std::vector<LayerSpec> layers;

  static ModelSpec make(Arch arch);

  /// Checks that consecutive layer shapes chain and the last layer emits
  /// `classes` logits. Throws DimensionError otherwise.
  void validate() const;
};

/// Dense network: the spec plus its parameters. Weights and biases are index
/// aligned with spec.layers. Only weights are sparsifiable.
struct Model {
  ModelSpec spec;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  Normalization norm;

  /// He-normal weights, zero biases.
  static Model initialize(const ModelSpec& spec, std::uint64_t seed);

  /// Σ N_l over sparsifiable weight tensors.
  std::size_t weight_count() const;
};

/// Builds the forward graph on caller-provided leaves (the calibration loop
/// substitutes masked weights here). `input` is [B×1×28×28]; returns [B×classes].
ad::Var forward_graph(const ModelSpec& spec, const ad::Var& input, std::span<const ad::Var> weights,
                      std::span<const ad::Var> biases);

/// Inference with explicit parameter tensors.
Tensor forward(const ModelSpec& spec, const Tensor& input, std::span<const Tensor> weights,
               std::span<const Tensor> biases);
Tensor forward(const Model& model, const Tensor& input);

/// Row-wise argmax of a [B×C] logit tensor.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

}  // namespace sparsecal
