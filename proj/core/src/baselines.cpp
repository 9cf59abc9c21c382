// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "sparsecal/error.hpp"

namespace sparsecal {

double weighted_mean_rate(std::span<const double> rates, std::span<const Shape> shapes) {
  if (rates.size() != shapes.size()) throw ContractError("rates and shapes differ in length");
  double pruned = 0.0, total = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const auto n = static_cast<double>(numel(shapes[i]));
    pruned += rates[i] * n;
    total += n;
  }
  return total > 0.0 ? pruned / total : 0.0;
}

AllocationResult uniform_allocation(std::span<const Shape> shapes, double target) {
  if (!(target >= 0.0 && target < 1.0)) throw ContractError("uniform target must lie in [0,1)");
  return {std::vector<double>(shapes.size(), target), "uniform"};
}

AllocationResult l2norm_global_allocation(std::span<const Tensor> weights, double target) {
  if (!(target >= 0.0 && target < 1.0)) throw ContractError("l2norm target must lie in [0,1)");
  // (score, layer, index) so ties break deterministically.
  std::vector<std::tuple<double, std::size_t, std::size_t>> scores;
  std::size_t total = 0;
  for (const auto& w : weights) total += w.size();
  scores.reserve(total);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    double norm = 0.0;
    for (double v : weights[l].data()) norm += v * v;
    norm = std::sqrt(norm);
    const double inv = norm > 0.0 ? 1.0 / norm : 0.0;
    for (std::size_t i = 0; i < weights[l].size(); ++i) scores.emplace_back(std::fabs(weights[l][i]) * inv, l, i);
  }
  const auto cut = static_cast<std::size_t>(std::llround(target * static_cast<double>(total)));
  std::vector<std::size_t> pruned(weights.size(), 0);
  if (cut > 0) {
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(cut - 1), scores.end());
    for (std::size_t i = 0; i < cut; ++i) ++pruned[std::get<1>(scores[i])];
  }
  AllocationResult result{{}, "l2norm"};
  for (std::size_t l = 0; l < weights.size(); ++l) {
    result.rates.push_back(static_cast<double>(pruned[l]) / static_cast<double>(weights[l].size()));
  }
  return result;
}

AllocationResult erk_allocation(std::span<const Shape> shapes, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ContractError("ERK target must lie in (0,1)");
  if (shapes.empty()) throw ContractError("ERK needs at least one layer");
  const std::size_t layers = shapes.size();
  std::vector<double> raw(layers), count(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Shape& s = shapes[l];
    const double dim_sum = std::accumulate(s.begin(), s.end(), 0.0, [](double a, std::size_t d) { return a + d; });
    count[l] = static_cast<double>(numel(s));
    raw[l] = dim_sum / count[l];
  }

  std::vector<bool> dense(layers, false);
  double eps = 0.0;
  for (;;) {
    double budget = 0.0, divisor = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      if (dense[l]) {
        budget -= count[l] * target;  // a dense layer overspends the kept budget by its would-be zeros
      } else {
        budget += count[l] * (1.0 - target);
        divisor += raw[l] * count[l];
      }
    }
    if (divisor == 0.0 || budget <= 0.0) throw ContractError("ERK target infeasible: every layer would need density > 1");
    eps = budget / divisor;
    double worst = 0.0;
    for (std::size_t l = 0; l < layers; ++l)
      if (!dense[l]) worst = std::max(worst, raw[l]);
    if (eps * worst <= 1.0) break;
    for (std::size_t l = 0; l < layers; ++l)
      if (!dense[l] && raw[l] == worst) dense[l] = true;
  }

  AllocationResult result{{}, "erk"};
  for (std::size_t l = 0; l < layers; ++l) result.rates.push_back(dense[l] ? 0.0 : 1.0 - eps * raw[l]);
  return result;
}

}  // namespace sparsecal
