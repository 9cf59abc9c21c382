// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparsecal/dataset.hpp"
#include "sparsecal/error.hpp"
#include "sparsecal/kde.hpp"
#include "sparsecal/losses.hpp"
#include "sparsecal/model.hpp"
#include "sparsecal/sparse.hpp"

namespace sparsecal {

enum class AllocatorKind { fcpts, uniform, erk, l2norm };

std::string to_string(AllocatorKind kind);
/// Accepts fcpts, uniform, erk, l2norm and pot_l2norm. Throws ConfigError.
AllocatorKind parse_allocator(std::string_view tag);

/// Which per-layer rate feeds the control loss. `empirical` uses the hard
/// mask; `kde` uses the smooth bridge estimate.
enum class RateSource { empirical, kde };

std::string to_string(RateSource source);
RateSource parse_rate_source(std::string_view tag);

struct CalibrationPlan {
  double target = 0.5;
  std::size_t epochs = 8;
  /// Overrides `epochs` when set; zero runs no optimisation at all.
  std::optional<std::size_t> steps;
  std::size_t batch_size = 32;
  double lr_thresholds = 1e-2;  // on thresholds divided by each layer's weight std
  double lr_weights = 1e-4;
  KdeSettings kde;
  double lambda_c = 1.0;
  std::uint64_t seed = 0;
  bool learn_rates = true;
  bool reconstruct = true;
  AllocatorKind allocator = AllocatorKind::fcpts;
  /// Starting allocation of the learnable arm (erk or uniform).
  AllocatorKind fcpts_init = AllocatorKind::erk;
  bool project_to_target = false;
  RateSource rate_source = RateSource::empirical;
  double divergence_factor = 1e3;
  /// Scales the control weight by `control_growth` after every step whose
  /// control loss exceeds `control_tolerance`, and shrinks it back toward
  /// lambda_c otherwise.
  bool adaptive_control = true;
  double control_tolerance = 1e-3;
  double control_growth = 1.1;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  /// Step budget for a calibration set of `samples` examples.
  std::size_t step_budget(std::size_t samples) const;
};

struct LayerState {
  std::string name;
  std::size_t count = 0;
  double threshold = 0.0;
  double scale = 1.0;   // weight std at initialisation
  double window = 1.0;  // KDE bandwidth, also the mask-surrogate width
  std::optional<KdeModel> kde;
  double rate = 0.0;       // bridge rate at `threshold`
  double hard_rate = 0.0;  // fraction of |w| ≤ threshold
  bool learnable = true;

  /// Recomputes `rate` and `hard_rate` from the current threshold.
  void refresh_rates(std::span<const double> weights);
};

/// Builds one state per sparsifiable layer with a fitted KDE and zero thresholds.
std::vector<LayerState> make_layer_states(const Model& model, const KdeSettings& settings, std::uint64_t seed);

/// Sets each threshold by bisection on the KDE bridge so that
/// |r(t_l) − r_init,l| ≤ 1e-6. Throws ContractError for r_init ∉ [0,1).
void init_thresholds(std::vector<LayerState>& layers, std::span<const double> r_init, const Model& model);

/// Sets each threshold to the exact magnitude quantile of its layer so the
/// hard rate equals round(r·N)/N.
void init_thresholds_exact(std::vector<LayerState>& layers, std::span<const double> r_init, const Model& model);

/// Σ dL/dM ⊙ ∂M/∂t + λ · ∂L_c/∂r_l · dr_l/dt_l
double threshold_grad(const LayerState& layer, const Tensor& weights, const Tensor& dloss_dmask,
                      const GlobalSparsityState& state, std::size_t index, double lambda_c);

struct StepRecord {
  std::size_t step = 0;
  double reconstruction = 0.0;
  double control = 0.0;
  double global_rate = 0.0;
  double control_weight = 0.0;
};

struct LayerAllocation {
  std::string name;
  std::size_t count = 0;
  double threshold = 0.0;
  double rate = 0.0;
};

struct CalibrationReport {
  std::string arch;
  CalibrationPlan plan;
  Normalization norm;
  std::size_t calib_size = 0;
  std::vector<StepRecord> steps;
  std::vector<LayerAllocation> layers;
  double achieved_rate = 0.0;
  double projection_scale = 1.0;
  double wall_seconds = 0.0;
  std::optional<double> accuracy_dense;
  std::optional<double> accuracy_sparse;
};

struct CalibrationResult {
  SparseModel sparse;
  /// Dense model holding M ⊙ W after reconstruction, rounded to float.
  Model reconstructed;
  std::vector<Tensor> masks;
  CalibrationReport report;
};

/// Thrown when the loss turns non-finite or exceeds the divergence guard.
/// Carries the report accumulated up to the failing step.
class CalibrationDiverged : public DivergenceError {
 public:
  CalibrationDiverged(const std::string& message, CalibrationReport report)
      : DivergenceError(message), report_(std::move(report)) {}
  const CalibrationReport& report() const noexcept { return report_; }

 private:
  CalibrationReport report_;
};

/// Hard masks from the current thresholds, with an optional global scale α on
/// every threshold chosen by bisection so the hard rate is within 0.001 of
/// the target. Returns α (1 when projection is off or already satisfied).
double finalize_thresholds(std::vector<LayerState>& layers, const Model& model, double target, bool project);

/// Runs the full calibration loop on `calib` against the dense teacher.
CalibrationResult calibrate(const Model& dense, const Dataset& calib, const CalibrationPlan& plan);

}  // namespace sparsecal
