// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/allocator.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "sparsecal/autodiff.hpp"
#include "sparsecal/baselines.hpp"
#include "sparsecal/masking.hpp"
#include "sparsecal/optim.hpp"
#include "sparsecal/train.hpp"

namespace sparsecal {

std::string to_string(AllocatorKind kind) {
  switch (kind) {
    case AllocatorKind::fcpts:
      return "fcpts";
    case AllocatorKind::uniform:
      return "uniform";
    case AllocatorKind::erk:
      return "erk";
    case AllocatorKind::l2norm:
      return "l2norm";
  }
  return "unknown";
}

AllocatorKind parse_allocator(std::string_view tag) {
  if (tag == "fcpts") return AllocatorKind::fcpts;
  if (tag == "uniform") return AllocatorKind::uniform;
  if (tag == "erk") return AllocatorKind::erk;
  if (tag == "l2norm" || tag == "pot_l2norm") return AllocatorKind::l2norm;
  throw ConfigError("unknown allocator '" + std::string(tag) + "' (expected fcpts, uniform, erk or l2norm)");
}

std::string to_string(RateSource source) { return source == RateSource::kde ? "kde" : "empirical"; }

RateSource parse_rate_source(std::string_view tag) {
  if (tag == "empirical") return RateSource::empirical;
  if (tag == "kde") return RateSource::kde;
  throw ConfigError("unknown rate source '" + std::string(tag) + "' (expected empirical or kde)");
}

void CalibrationPlan::validate() const {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("target sparsity must lie in (0,1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(lr_thresholds > 0.0) || !(lr_weights > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(lambda_c >= 0.0) || !std::isfinite(lambda_c)) throw ConfigError("lambda_c must be a finite non-negative value");
  if (kde.samples == 0) throw ConfigError("KDE sample count must be positive");
  if (!(kde.bandwidth > 0.0) || !std::isfinite(kde.bandwidth)) throw ConfigError("KDE bandwidth must be positive");
  if (!steps && epochs == 0) throw ConfigError("epoch count must be positive");
  if (fcpts_init != AllocatorKind::erk && fcpts_init != AllocatorKind::uniform) {
    throw ConfigError("fcpts initialisation must be erk or uniform");
  }
  if (!(divergence_factor > 1.0)) throw ConfigError("divergence factor must exceed 1");
  if (!(control_tolerance > 0.0)) throw ConfigError("control tolerance must be positive");
  if (!(control_growth >= 1.0) || !std::isfinite(control_growth)) throw ConfigError("control growth must be at least 1");
}

std::size_t CalibrationPlan::step_budget(std::size_t samples) const {
  if (steps) return *steps;
  return epochs * ((samples + batch_size - 1) / batch_size);
}

void LayerState::refresh_rates(std::span<const double> weights) {
  rate = kde ? kde->rate(threshold) : empirical_sparsity(weights, threshold);
  hard_rate = empirical_sparsity(weights, threshold);
}

namespace {

double stddev(std::span<const double> w) {
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(w.size()));
}

double max_abs(std::span<const double> w) {
  double m = 0.0;
  for (double v : w) m = std::max(m, std::fabs(v));
  return m;
}

std::uint64_t kde_seed(std::uint64_t seed, std::size_t layer, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(layer), static_cast<std::uint32_t>(epoch), 0x6b6465u};
  std::uint32_t words[2];
  seq.generate(std::begin(words), std::end(words));
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

void check_rates(const std::vector<LayerState>& layers, std::span<const double> r_init, const Model& model) {
  if (r_init.size() != layers.size() || model.weights.size() != layers.size()) {
    throw ContractError("initial rates, layers and weights differ in length");
  }
  for (double r : r_init) {
    if (!(r >= 0.0 && r < 1.0)) throw ContractError("initial rate " + std::to_string(r) + " is outside [0,1)");
  }
}

double upper_bound(const LayerState& layer, std::span<const double> weights) {
  return max_abs(weights) + 10.0 * layer.window;
}

}  // namespace

std::vector<LayerState> make_layer_states(const Model& model, const KdeSettings& settings, std::uint64_t seed) {
  std::vector<LayerState> out;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto w = model.weights[l].data();
    LayerState s;
    s.name = model.spec.layers[l].name;
    s.count = w.size();
    const double sd = stddev(w);
    s.scale = sd > 0.0 ? sd : 1.0;
    s.kde.emplace(fit_kde(w, settings, kde_seed(seed, l, 0)));
    s.window = s.kde->bandwidth();
    s.refresh_rates(w);
    out.push_back(std::move(s));
  }
  return out;
}

void init_thresholds(std::vector<LayerState>& layers, std::span<const double> r_init, const Model& model) {
  check_rates(layers, r_init, model);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].kde) throw ContractError("layer " + layers[l].name + " has no fitted KDE");
    layers[l].threshold = invert_bridge(*layers[l].kde, r_init[l]);
    layers[l].refresh_rates(model.weights[l].data());
  }
}

void init_thresholds_exact(std::vector<LayerState>& layers, std::span<const double> r_init, const Model& model) {
  check_rates(layers, r_init, model);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].threshold = magnitude_quantile(model.weights[l].data(), r_init[l]);
    layers[l].refresh_rates(model.weights[l].data());
  }
}

double threshold_grad(const LayerState& layer, const Tensor& weights, const Tensor& dloss_dmask,
                      const GlobalSparsityState& state, std::size_t index, double lambda_c) {
  if (!weights.same_shape(dloss_dmask)) throw DimensionError("mask gradient shape differs from weights");
  const double h = layer.window;
  const double inv_h = 1.0 / h;
  double rec = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double g = dloss_dmask[i];
    if (g == 0.0) continue;
    rec -= g * std_normal_pdf((std::fabs(weights[i]) - layer.threshold) * inv_h) * inv_h;
  }
  double ctrl = 0.0;
  if (lambda_c != 0.0) {
    const double dr_dt = layer.kde ? layer.kde->rate_derivative(layer.threshold) : 0.0;
    ctrl = lambda_c * control_grad(state, index) * dr_dt;
  }
  return rec + ctrl;
}

double finalize_thresholds(std::vector<LayerState>& layers, const Model& model, double target, bool project) {
  auto global_rate = [&](double alpha) {
    double pruned = 0.0, total = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = model.weights[l].data();
      pruned += empirical_sparsity(w, alpha * layers[l].threshold) * static_cast<double>(w.size());
      total += static_cast<double>(w.size());
    }
    return pruned / total;
  };
  double alpha = 1.0;
  if (project && std::fabs(global_rate(1.0) - target) > 1e-3) {
    double hi_alpha = 1.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].threshold > 0.0) {
        hi_alpha = std::max(hi_alpha, (max_abs(model.weights[l].data()) + 1e-12) / layers[l].threshold);
      }
    }
    double lo = 0.0, hi = hi_alpha;
    for (int it = 0; it < 200; ++it) {
      alpha = 0.5 * (lo + hi);
      const double r = global_rate(alpha);
      if (std::fabs(r - target) <= 1e-3) break;
      (r < target ? lo : hi) = alpha;
    }
    for (auto& layer : layers) layer.threshold *= alpha;
  }
  for (std::size_t l = 0; l < layers.size(); ++l) layers[l].refresh_rates(model.weights[l].data());
  return alpha;
}

namespace {

std::vector<double> initial_rates(AllocatorKind kind, const Model& model, double target) {
  std::vector<Shape> shapes;
  for (const auto& w : model.weights) shapes.push_back(w.shape());
  switch (kind) {
    case AllocatorKind::uniform:
      return uniform_allocation(shapes, target).rates;
    case AllocatorKind::erk:
      return erk_allocation(shapes, target).rates;
    case AllocatorKind::l2norm:
      return l2norm_global_allocation(model.weights, target).rates;
    case AllocatorKind::fcpts:
      break;
  }
  throw ContractError("fcpts has no fixed allocation");
}

GlobalSparsityState sparsity_state(const std::vector<LayerState>& layers, double target, RateSource source) {
  GlobalSparsityState s;
  s.target = target;
  for (const auto& l : layers) {
    s.rates.push_back(source == RateSource::kde ? l.rate : l.hard_rate);
    s.counts.push_back(l.count);
  }
  return s;
}

double hard_global_rate(const std::vector<LayerState>& layers) {
  double pruned = 0.0, total = 0.0;
  for (const auto& l : layers) {
    pruned += l.hard_rate * static_cast<double>(l.count);
    total += static_cast<double>(l.count);
  }
  return pruned / total;
}

void fill_allocation(CalibrationReport& report, const std::vector<LayerState>& layers) {
  report.layers.clear();
  for (const auto& l : layers) report.layers.push_back({l.name, l.count, l.threshold, l.hard_rate});
  report.achieved_rate = hard_global_rate(layers);
}

// Keeps a weight of a frozen-allocation layer on the kept side of its
// threshold after an update.
void hold_mask(Tensor& weights, const Tensor& mask, double threshold) {
  const double floor = std::nextafter(threshold, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (mask[i] != 0.0 && std::fabs(weights[i]) <= threshold) weights[i] = std::copysign(floor, weights[i]);
  }
}

}  // namespace

CalibrationResult calibrate(const Model& dense, const Dataset& calib, const CalibrationPlan& plan) {
  const auto start = std::chrono::steady_clock::now();
  plan.validate();
  dense.spec.validate();
  if (calib.size() == 0) throw ContractError("calibration set is empty");
  if (calib.pixels() != numel(dense.spec.input_shape)) {
    throw DimensionError("calibration images do not match the model input shape");
  }

  const std::size_t layer_count = dense.weights.size();
  Model work = dense;
  auto layers = make_layer_states(work, plan.kde, plan.seed);

  if (plan.allocator == AllocatorKind::fcpts) {
    init_thresholds(layers, initial_rates(plan.fcpts_init, work, plan.target), work);
  } else {
    init_thresholds_exact(layers, initial_rates(plan.allocator, work, plan.target), work);
  }
  const bool learn = plan.learn_rates;
  for (auto& l : layers) l.learnable = learn;

  CalibrationReport report;
  report.arch = to_string(dense.spec.arch);
  report.plan = plan;
  report.norm = dense.norm;
  report.calib_size = calib.size();

  const std::size_t total_steps = (learn || plan.reconstruct) ? plan.step_budget(calib.size()) : 0;
  const std::size_t steps_per_epoch = (calib.size() + plan.batch_size - 1) / plan.batch_size;

  // Teacher logits for every calibration sample, computed once.
  Tensor teacher;
  if (total_steps > 0) {
    std::vector<std::size_t> all(calib.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    teacher = forward(dense, make_batch(calib, all, dense.norm));
  }
  const std::size_t classes = dense.spec.classes;

  std::mt19937_64 rng(plan.seed);
  std::vector<std::size_t> order(calib.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> tau(layer_count);
  AdamState tau_state;
  std::vector<AdamState> weight_state(layer_count);
  std::vector<ad::Var> bias_vars;
  for (const auto& b : work.biases) bias_vars.push_back(ad::constant(b));

  double initial_total = 0.0;
  double control_weight = plan.lambda_c;
  for (std::size_t step = 0; step < total_steps; ++step) {
    const std::size_t epoch = step / steps_per_epoch;
    const std::size_t pos = step % steps_per_epoch;
    if (pos == 0) {
      std::shuffle(order.begin(), order.end(), rng);
      if (epoch > 0) {
        for (std::size_t l = 0; l < layer_count; ++l) {
          layers[l].kde.emplace(fit_kde(work.weights[l].data(), plan.kde, kde_seed(plan.seed, l, epoch)));
          layers[l].window = layers[l].kde->bandwidth();
          layers[l].refresh_rates(work.weights[l].data());
        }
      }
    }
    const std::size_t begin = pos * plan.batch_size;
    const std::size_t end = std::min(calib.size(), begin + plan.batch_size);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);

    Tensor target_logits({idx.size(), classes});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(teacher.raw() + idx[i] * classes, classes, target_logits.raw() + i * classes);
    }

    std::vector<Tensor> masks;
    std::vector<ad::Var> weight_vars, mask_vars, masked;
    for (std::size_t l = 0; l < layer_count; ++l) {
      masks.push_back(gen_mask(work.weights[l], layers[l].threshold));
      weight_vars.push_back(plan.reconstruct ? ad::parameter(work.weights[l]) : ad::constant(work.weights[l]));
      mask_vars.push_back(learn ? ad::parameter(masks.back()) : ad::constant(masks.back()));
      masked.push_back(ad::mul(weight_vars.back(), mask_vars.back()));
    }
    const auto logits = forward_graph(work.spec, ad::constant(make_batch(calib, idx, work.norm)), masked, bias_vars);
    const auto rec = reconstruction_loss(target_logits, logits);
    ad::backward(rec);

    const auto state = sparsity_state(layers, plan.target, plan.rate_source);
    const double rec_value = rec.value().item();
    const double ctrl_value = control_loss(state);
    const double total = total_loss(rec_value, ctrl_value, plan.lambda_c);
    report.steps.push_back({step, rec_value, ctrl_value, hard_global_rate(layers), control_weight});
    if (step == 0) initial_total = total;
    if (!std::isfinite(total) || total > plan.divergence_factor * std::max(initial_total, 1e-3)) {
      fill_allocation(report, layers);
      report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      throw CalibrationDiverged("calibration diverged at step " + std::to_string(step) + " (loss " +
                                    std::to_string(total) + ")",
                                std::move(report));
    }

    if (learn) {
      std::vector<double> grads(layer_count);
      for (std::size_t l = 0; l < layer_count; ++l) {
        tau[l] = layers[l].threshold / layers[l].scale;
        grads[l] = threshold_grad(layers[l], work.weights[l], mask_vars[l].grad(), state, l, control_weight) *
                   layers[l].scale;
      }
      const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
      const double lr = plan.lr_thresholds * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      adam_step(tau, grads, tau_state, lr);
      for (std::size_t l = 0; l < layer_count; ++l) {
        const double hi = upper_bound(layers[l], work.weights[l].data());
        layers[l].threshold = std::clamp(tau[l] * layers[l].scale, 0.0, hi);
      }
    }
    if (plan.adaptive_control) {
      control_weight = ctrl_value > plan.control_tolerance
                           ? control_weight * plan.control_growth
                           : std::max(plan.lambda_c, control_weight / plan.control_growth);
    }
    if (plan.reconstruct) {
      for (std::size_t l = 0; l < layer_count; ++l) {
        adam_step(work.weights[l].data(), weight_vars[l].grad().data(), weight_state[l], plan.lr_weights,
                  masks[l].data());
        if (!learn) hold_mask(work.weights[l], masks[l], layers[l].threshold);
      }
    }
    for (std::size_t l = 0; l < layer_count; ++l) layers[l].refresh_rates(work.weights[l].data());
  }

  report.projection_scale = finalize_thresholds(layers, work, plan.target, plan.project_to_target);
  fill_allocation(report, layers);

  CalibrationResult result;
  for (std::size_t l = 0; l < layer_count; ++l) {
    result.masks.push_back(gen_mask(work.weights[l], layers[l].threshold));
    work.weights[l] = hadamard(work.weights[l], result.masks.back());
  }
  round_to_float(work);
  result.sparse = SparseModel::build(work, result.masks);
  result.reconstructed = std::move(work);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.report = std::move(report);
  return result;
}

}  // namespace sparsecal
