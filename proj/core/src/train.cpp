// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/train.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "sparsecal/error.hpp"
#include "sparsecal/losses.hpp"
#include "sparsecal/optim.hpp"

namespace sparsecal {

void round_to_float(Model& model) {
  auto round = [](Tensor& t) {
    for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  };
  for (auto& w : model.weights) round(w);
  for (auto& b : model.biases) round(b);
  model.norm.mean = static_cast<float>(model.norm.mean);
  model.norm.stddev = static_cast<float>(model.norm.stddev);
}

Model train_dense(const ModelSpec& spec, const Dataset& data, const TrainOptions& options, TrainLog* log,
                  const std::function<void(std::size_t, double)>& progress) {
  if (data.size() == 0) throw ContractError("training set is empty");
  if (options.batch_size == 0) throw ContractError("batch size must be positive");
  if (data.rows * data.cols != numel(spec.input_shape)) throw DimensionError("dataset images do not match the model input");

  Model model = Model::initialize(spec, options.seed);
  model.norm = fit_normalization(data);

  std::vector<AdamState> w_state(model.weights.size()), b_state(model.biases.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::uint8_t> labels;
      for (auto i : idx) labels.push_back(data.labels[i]);

      std::vector<ad::Var> w, b;
      for (auto& t : model.weights) w.push_back(ad::parameter(t));
      for (auto& t : model.biases) b.push_back(ad::parameter(t));
      auto logits = forward_graph(spec, ad::constant(make_batch(data, idx, model.norm)), w, b);
      ad::Var loss;
      try {
        loss = cross_entropy(logits, labels);
      } catch (const DivergenceError&) {
        throw;
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      if (!std::isfinite(loss.value().item())) throw DivergenceError("training loss became non-finite");
      ad::backward(loss);
      for (std::size_t l = 0; l < w.size(); ++l) {
        adam_step(model.weights[l].data(), w[l].grad().data(), w_state[l], options.learning_rate);
        adam_step(model.biases[l].data(), b[l].grad().data(), b_state[l], options.learning_rate);
      }
      loss_sum += loss.value().item();
      ++batches;
    }
    const double mean_loss = loss_sum / static_cast<double>(batches);
    if (log) log->epoch_loss.push_back(mean_loss);
    if (progress) progress(epoch, mean_loss);
  }
  round_to_float(model);
  return model;
}

double top1(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const auto predicted = argmax_rows(logits);
  if (predicted.size() != labels.size()) throw DimensionError("logit rows do not match label count");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate(const Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto predicted = argmax_rows(forward(model, make_batch(data, idx, model.norm)));
    for (std::size_t i = 0; i < idx.size(); ++i) hits += predicted[i] == data.labels[idx[i]];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace sparsecal
