// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sparsecal/error.hpp"

namespace sparsecal {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::mlp_3x256:
      return "mlp-3x256";
    case Arch::cnn_2conv_2fc:
      return "cnn-2conv-2fc";
  }
  return "unknown";
}

Arch parse_arch(std::string_view tag) {
  if (tag == "mlp-3x256") return Arch::mlp_3x256;
  if (tag == "cnn-2conv-2fc") return Arch::cnn_2conv_2fc;
  throw ConfigError("unknown architecture '" + std::string(tag) + "' (expected mlp-3x256 or cnn-2conv-2fc)");
}

ModelSpec ModelSpec::make(Arch arch) {
  ModelSpec spec;
  spec.arch = arch;
  switch (arch) {
    case Arch::mlp_3x256:
      spec.layers = {
          {"fc1", LayerKind::dense, {256, 784}},
          {"fc2", LayerKind::dense, {256, 256}},
          {"fc3", LayerKind::dense, {256, 256}},
          {"fc4", LayerKind::dense, {10, 256}, 1, 0, false},
      };
      break;
    case Arch::cnn_2conv_2fc:
      spec.layers = {
          {"conv1", LayerKind::conv, {16, 1, 5, 5}, 2, 2},
          {"conv2", LayerKind::conv, {32, 16, 3, 3}, 2, 1},
          {"fc1", LayerKind::dense, {64, 32 * 7 * 7}},
          {"fc2", LayerKind::dense, {10, 64}, 1, 0, false},
      };
      break;
  }
  spec.validate();
  return spec;
}

void ModelSpec::validate() const {
  if (layers.empty()) throw DimensionError("model has no layers");
  Shape current = input_shape;  // per-sample
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    if (layer.kind == LayerKind::conv) {
      if (current.size() != 3 || layer.weight_shape.size() != 4 || layer.weight_shape[1] != current[0]) {
        throw DimensionError("layer " + layer.name + " kernel " + to_string(layer.weight_shape) +
                             " does not fit input " + to_string(current));
      }
      kernels::ConvGeometry g{current[0], current[1], current[2], layer.weight_shape[2], layer.weight_shape[3],
                              layer.stride, layer.padding};
      if (layer.stride == 0 || g.kernel_h > g.height + 2 * g.padding || g.kernel_w > g.width + 2 * g.padding) {
        throw DimensionError("layer " + layer.name + " has invalid stride/padding");
      }
      current = {layer.weight_shape[0], g.out_h(), g.out_w()};
    } else {
      if (layer.weight_shape.size() != 2 || layer.weight_shape[1] != numel(current)) {
        throw DimensionError("layer " + layer.name + " weight " + to_string(layer.weight_shape) +
                             " does not fit input " + to_string(current));
      }
      current = {layer.weight_shape[0]};
    }
  }
  if (current.size() != 1 || current[0] != classes) {
    throw DimensionError("final layer must emit " + std::to_string(classes) + " logits");
  }
}

Model Model::initialize(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model model;
  model.spec = spec;
  std::mt19937_64 rng(seed);
  for (const auto& layer : spec.layers) {
    const std::size_t fan_in = numel(layer.weight_shape) / layer.weight_shape.front();
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Tensor w(layer.weight_shape);
    for (auto& v : w.data()) v = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(Shape{layer.out_features()}, 0.0);
  }
  return model;
}

std::size_t Model::weight_count() const {
  std::size_t total = 0;
  for (const auto& w : weights) total += w.size();
  return total;
}

ad::Var forward_graph(const ModelSpec& spec, const ad::Var& input, std::span<const ad::Var> weights,
                      std::span<const ad::Var> biases) {
  if (weights.size() != spec.layers.size() || biases.size() != spec.layers.size()) {
    throw DimensionError("parameter count does not match the model layers");
  }
  ad::Var h = input;
  const std::size_t batch = input.value().dim(0);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (weights[i].value().shape() != layer.weight_shape) {
      throw DimensionError("layer " + layer.name + " expects weight " + to_string(layer.weight_shape) + ", got " +
                           to_string(weights[i].value().shape()));
    }
    if (layer.kind == LayerKind::conv) {
      h = ad::conv2d(h, weights[i], biases[i], {layer.stride, layer.padding});
    } else {
      if (h.value().rank() != 2) h = ad::reshape(h, {batch, h.value().size() / batch});
      h = ad::linear(h, weights[i], biases[i]);
    }
    if (layer.relu) h = ad::relu(h);
  }
  return h;
}

Tensor forward(const ModelSpec& spec, const Tensor& input, std::span<const Tensor> weights,
               std::span<const Tensor> biases) {
  std::vector<ad::Var> w, b;
  for (const auto& t : weights) w.push_back(ad::constant(t));
  for (const auto& t : biases) b.push_back(ad::constant(t));
  return forward_graph(spec, ad::constant(input), w, b).value();
}

Tensor forward(const Model& model, const Tensor& input) {
  return forward(model.spec, input, model.weights, model.biases);
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  const std::size_t cols = logits.shape().back();
  const std::size_t rows = logits.size() / cols;
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.raw() + r * cols;
    out[r] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

}  // namespace sparsecal
