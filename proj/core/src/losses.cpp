// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsecal/error.hpp"

namespace sparsecal {

void GlobalSparsityState::validate() const {
  if (rates.size() != counts.size()) throw ContractError("rates and counts differ in length");
  if (rates.empty()) throw ContractError("sparsity state has no layers");
  if (!(target > 0.0 && target < 1.0)) throw ContractError("target sparsity must lie in (0,1)");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (counts[i] == 0) throw ContractError("layer element count must be at least 1");
    if (!(rates[i] >= 0.0 && rates[i] <= 1.0)) throw ContractError("layer rate must lie in [0,1]");
  }
}

double weighted_rate(const GlobalSparsityState& state) {
  state.validate();
  double pruned = 0.0, total = 0.0;
  for (std::size_t i = 0; i < state.rates.size(); ++i) {
    pruned += state.rates[i] * static_cast<double>(state.counts[i]);
    total += static_cast<double>(state.counts[i]);
  }
  return pruned / total;
}

double control_loss(const GlobalSparsityState& state) { return std::fabs(weighted_rate(state) - state.target); }

double control_grad(const GlobalSparsityState& state, std::size_t layer) {
  const double mean = weighted_rate(state);
  if (layer >= state.counts.size()) throw ContractError("layer index out of range");
  double total = 0.0;
  for (auto n : state.counts) total += static_cast<double>(n);
  const double share = static_cast<double>(state.counts[layer]) / total;
  if (mean > state.target) return share;
  if (mean < state.target) return -share;
  return 0.0;
}

namespace {

void check_logits(const Tensor& dense, const Tensor& sparse) {
  if (dense.rank() != 2 || dense.shape() != sparse.shape()) {
    throw DimensionError("logit shapes " + to_string(dense.shape()) + " and " + to_string(sparse.shape()) +
                         " must match as [B×C]");
  }
  if (!dense.all_finite() || !sparse.all_finite()) throw NumericError("non-finite logits in reconstruction loss");
}

// Writes log-softmax of each row of `logits` into `out`.
void log_softmax_rows(const Tensor& logits, std::vector<double>& out) {
  const std::size_t cols = logits.dim(1), rows = logits.dim(0);
  out.resize(logits.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = logits.raw() + r * cols;
    const double peak = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(x[c] - peak);
    const double lse = peak + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[c] - lse;
  }
}

}  // namespace

double reconstruction_loss(const Tensor& dense_logits, const Tensor& sparse_logits) {
  check_logits(dense_logits, sparse_logits);
  std::vector<double> log_p, log_q;
  log_softmax_rows(dense_logits, log_p);
  log_softmax_rows(sparse_logits, log_q);
  double total = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    const double p = std::exp(log_p[i]);
    if (p > 0.0) total += p * (log_p[i] - log_q[i]);
  }
  return std::max(total / static_cast<double>(dense_logits.dim(0)), 0.0);
}

ad::Var reconstruction_loss(const Tensor& dense_logits, const ad::Var& sparse_logits) {
  const double value = reconstruction_loss(dense_logits, sparse_logits.value());
  std::vector<double> log_p, log_q;
  log_softmax_rows(dense_logits, log_p);
  log_softmax_rows(sparse_logits.value(), log_q);
  const double batch = static_cast<double>(dense_logits.dim(0));
  // d/dz_sparse KL(p‖softmax(z)) = softmax(z) − p, averaged over the batch.
  std::vector<double> slope(log_p.size());
  for (std::size_t i = 0; i < slope.size(); ++i) slope[i] = (std::exp(log_q[i]) - std::exp(log_p[i])) / batch;
  return ad::make_node(Tensor::scalar(value), {sparse_logits}, [slope = std::move(slope)](ad::Node& n) {
    ad::Node& parent = *n.parents[0];
    parent.ensure_grad();
    const double g = n.grad[0];
    for (std::size_t i = 0; i < slope.size(); ++i) parent.grad[i] += g * slope[i];
  });
}

double total_loss(double reconstruction, double control, double lambda_c) {
  if (!std::isfinite(reconstruction) || !std::isfinite(control)) throw NumericError("non-finite loss term");
  return reconstruction + lambda_c * control;
}

ad::Var cross_entropy(const ad::Var& logits, std::span<const std::uint8_t> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.dim(0) != labels.size()) throw DimensionError("cross_entropy expects [B×C] logits and B labels");
  if (!z.all_finite()) throw NumericError("non-finite logits in cross entropy");
  std::vector<double> log_q;
  log_softmax_rows(z, log_q);
  const std::size_t rows = z.dim(0), cols = z.dim(1);
  double total = 0.0;
  std::vector<double> slope(z.size());
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= cols) throw ContractError("label outside class range");
    total -= log_q[r * cols + labels[r]];
    for (std::size_t c = 0; c < cols; ++c) {
      slope[r * cols + c] = (std::exp(log_q[r * cols + c]) - (c == labels[r] ? 1.0 : 0.0)) / static_cast<double>(rows);
    }
  }
  return ad::make_node(Tensor::scalar(total / static_cast<double>(rows)), {logits},
                       [slope = std::move(slope)](ad::Node& n) {
                         ad::Node& parent = *n.parents[0];
                         parent.ensure_grad();
                         const double g = n.grad[0];
                         for (std::size_t i = 0; i < slope.size(); ++i) parent.grad[i] += g * slope[i];
                       });
}

}  // namespace sparsecal
