// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "sparsecal/error.hpp"

namespace sparsecal {

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

KdeModel::KdeModel(std::vector<double> samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (samples_.empty()) throw ContractError("KDE needs at least one sample");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
    throw ContractError("KDE bandwidth must be positive and finite, got " + std::to_string(bandwidth_));
  }
  for (double s : samples_) {
    if (!std::isfinite(s)) throw ContractError("KDE samples must be finite");
  }
}

double KdeModel::pdf(double w) const {
  double total = 0.0;
  for (double s : samples_) total += std_normal_pdf((w - s) / bandwidth_);
  return total / (static_cast<double>(samples_.size()) * bandwidth_);
}

double KdeModel::rate(double t) const {
  if (!(t >= 0.0)) throw ContractError("bridge threshold must be non-negative, got " + std::to_string(t));
  if (t == 0.0) return 0.0;
  double total = 0.0;
  for (double s : samples_) {
    total += std_normal_cdf((t - s) / bandwidth_) - std_normal_cdf((-t - s) / bandwidth_);
  }
  return std::clamp(total / static_cast<double>(samples_.size()), 0.0, 1.0);
}

double KdeModel::rate_derivative(double t) const {
  if (!(t >= 0.0)) throw ContractError("bridge threshold must be non-negative, got " + std::to_string(t));
  return pdf(t) + pdf(-t);
}

BridgeEval evaluate_bridge(const KdeModel& model, double t) {
  return {t, model.rate(t), model.rate_derivative(t)};
}

double resolve_bandwidth(std::span<const double> weights, const KdeSettings& settings) {
  if (!(settings.bandwidth > 0.0)) throw ContractError("KDE bandwidth setting must be positive");
  if (!settings.relative) return settings.bandwidth;
  const double n = static_cast<double>(weights.size());
  const double mean = std::accumulate(weights.begin(), weights.end(), 0.0) / n;
  double var = 0.0;
  for (double w : weights) var += (w - mean) * (w - mean);
  double scale = std::sqrt(var / n);
  if (!(scale > 0.0)) {
    // Constant layer: fall back to the mean magnitude, then to unit scale.
    double mag = 0.0;
    for (double w : weights) mag += std::fabs(w);
    scale = mag > 0.0 ? mag / n : 1.0;
  }
  return settings.bandwidth * scale;
}

KdeModel fit_kde(std::span<const double> weights, const KdeSettings& settings, std::uint64_t seed) {
  if (weights.empty()) throw ContractError("cannot fit a KDE to an empty weight tensor");
  if (settings.samples == 0) throw ContractError("KDE sample count must be at least 1");
  const std::size_t n = settings.samples;
  const std::size_t total = weights.size();
  std::mt19937_64 rng(seed);
  std::vector<double> samples;
  samples.reserve(n);

  if (total < n) {
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t i = 0; i < n; ++i) samples.push_back(weights[pick(rng)]);
  } else {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::fabs(weights[a]) < std::fabs(weights[b]); });
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t lo = s * total / n;
      const std::size_t hi = (s + 1) * total / n;  // exclusive, hi > lo since total >= n
      std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
      samples.push_back(weights[order[pick(rng)]]);
    }
  }
  return KdeModel(std::move(samples), resolve_bandwidth(weights, settings));
}

double empirical_sparsity(std::span<const double> weights, double t) {
  if (!(t >= 0.0)) throw ContractError("threshold must be non-negative");
  if (weights.empty()) return 0.0;
  const auto pruned = std::count_if(weights.begin(), weights.end(), [t](double w) { return std::fabs(w) - t <= 0.0; });
  return static_cast<double>(pruned) / static_cast<double>(weights.size());
}

double magnitude_quantile(std::span<const double> weights, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ContractError("rate must lie in [0,1]");
  if (weights.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(weights.size())));
  if (k == 0) return 0.0;
  std::vector<double> mags(weights.size());
  std::transform(weights.begin(), weights.end(), mags.begin(), [](double w) { return std::fabs(w); });
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k - 1), mags.end());
  return mags[k - 1];
}

double invert_bridge(const KdeModel& model, double target, double tolerance) {
  if (!(target >= 0.0 && target < 1.0)) {
    throw ContractError("bridge inversion target must lie in [0,1), got " + std::to_string(target));
  }
  if (target == 0.0) return 0.0;
  double hi = 0.0;
  for (double s : model.samples()) hi = std::max(hi, std::fabs(s));
  hi += 10.0 * model.bandwidth();
  double lo = 0.0;
  if (model.rate(hi) < target) throw ContractError("bridge target not bracketed by [0, max|w| + 10h]");
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double r = model.rate(mid);
    if (std::fabs(r - target) <= tolerance) break;
    (r < target ? lo : hi) = mid;
  }
  return mid;
}

}  // namespace sparsecal
