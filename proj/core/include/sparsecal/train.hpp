// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "sparsecal/dataset.hpp"
#include "sparsecal/model.hpp"

namespace sparsecal {

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

/// Cross-entropy training of a freshly initialized model with Adam. The
/// result is a pure function of (spec, data, options); weights are rounded to
/// 32-bit precision at the end so the in-memory model equals its checkpoint.
/// Zero epochs returns the (rounded) initialization. Throws DivergenceError
/// when the loss turns non-finite.
Model train_dense(const ModelSpec& spec, const Dataset& data, const TrainOptions& options,
                  TrainLog* log = nullptr,
                  const std::function<void(std::size_t epoch, double loss)>& progress = {});

/// Top-1 accuracy in [0,1]. Returns 0 for an empty dataset.
double evaluate(const Model& model, const Dataset& data, std::size_t batch_size = 256);

/// Top-1 accuracy of arbitrary logits against labels.
double top1(const Tensor& logits, std::span<const std::uint8_t> labels);

/// Rounds every parameter to the nearest float.
void round_to_float(Model& model);

}  // namespace sparsecal
