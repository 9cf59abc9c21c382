// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sparsecal {

double std_normal_pdf(double x);
double std_normal_cdf(double x);

struct KdeSettings {
  std::size_t samples = 100;
  /// Multiplier on the layer's weight standard deviation when `relative`,
  /// otherwise an absolute bandwidth in weight units.
  double bandwidth = 0.1;
  bool relative = true;
};

/// Gaussian-kernel density estimate of a layer's weight distribution.
///
/// p(w) = 1/(n·h) · Σ φ((w − w_i)/h). The model is immutable once built and
/// can be shared read-only between threads.
class KdeModel {
 public:
  KdeModel(std::vector<double> samples, double bandwidth);

  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double bandwidth() const noexcept { return bandwidth_; }

  double pdf(double w) const;

  /// Probability mass on [−t, t], i.e. the sparsity rate a magnitude
  /// threshold t induces under the estimated distribution. Closed form via
  /// the normal CDF. Throws ContractError for t < 0.
  double rate(double t) const;

  /// d rate / d t = p(t) + p(−t). Throws ContractError for t < 0.
  double rate_derivative(double t) const;

 private:
  std::vector<double> samples_;
  double bandwidth_;
};

struct BridgeEval {
  double threshold;
  double rate;
  double rate_derivative;
};

BridgeEval evaluate_bridge(const KdeModel& model, double t);

/// Bandwidth the settings resolve to for this weight population.
double resolve_bandwidth(std::span<const double> weights, const KdeSettings& settings);

/// Draws `settings.samples` points from `weights` and fits a KDE.
///
/// Sampling is stratified on magnitude: the weights are ordered by |w| and
/// split into n equal-count strata, one uniform draw per stratum. Layers with
/// fewer than n weights are sampled uniformly with replacement. The result is
/// a pure function of (weights, settings, seed).
KdeModel fit_kde(std::span<const double> weights, const KdeSettings& settings, std::uint64_t seed);

/// Fraction of weights with |w| ≤ t (ties count as pruned).
double empirical_sparsity(std::span<const double> weights, double t);

/// Smallest threshold pruning round(rate·N) weights by magnitude: the k-th
/// smallest |w|, or 0 when k is 0.
double magnitude_quantile(std::span<const double> weights, double rate);

/// Solves rate(t) = target by bisection on [0, max|w_i| + 10h].
double invert_bridge(const KdeModel& model, double target, double tolerance = 1e-6);

}  // namespace sparsecal
