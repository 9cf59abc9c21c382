// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0
//
// sparsecal command-line front end.
//
//   sparsecal synth-data --count 12000 --seed 1 --dataset-images train.idx --dataset-labels train.lbl
//   sparsecal train --arch mlp-3x256 --dataset-images ... --dataset-labels ... --out dense.ckpt
//   sparsecal calibrate --checkpoint dense.ckpt --dataset-images ... --dataset-labels ...
//     --target-sparsity 0.7 --allocator fcpts --out sparse.spm --report-dir run/
//   sparsecal eval --model sparse.spm --dataset-images ... --dataset-labels ...
//   sparsecal bench --model sparse.spm --checkpoint dense.ckpt
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsecal/allocator.hpp"
#include "sparsecal/checkpoint.hpp"
#include "sparsecal/dataset.hpp"
#include "sparsecal/error.hpp"
#include "sparsecal/model.hpp"
#include "sparsecal/report.hpp"
#include "sparsecal/sparse.hpp"
#include "sparsecal/train.hpp"

namespace fs = std::filesystem;
using namespace sparsecal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct DataPaths {
  std::string images;
  std::string labels;
};

struct Options {
  std::uint64_t seed = 0;

  // synth-data
  std::size_t count = 12000;

  // train
  std::string arch = "mlp-3x256";
  DataPaths data;
  DataPaths eval;
  std::size_t train_epochs = 5;
  std::size_t train_batch = 64;
  double train_lr = 1e-3;

  // calibrate / eval / bench
  std::string checkpoint;
  std::string model;
  std::string out;
  std::string report_dir;
  double target = 0.5;
  std::string allocator = "fcpts";
  std::optional<bool> learn_rates;
  bool no_reconstruct = false;
  std::optional<std::size_t> steps;
  std::size_t calib_epochs = 8;
  std::size_t batch_size = 32;
  double lr_thresholds = 1e-2;
  double lr_weights = 1e-4;
  double lambda_c = 1.0;
  std::size_t kde_samples = 100;
  double kde_bandwidth = 0.1;
  bool project = false;
  std::size_t calib_size = 1024;
  std::string rate_source = "empirical";
  std::size_t bench_batch = 64;
  std::size_t bench_reps = 30;
};

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(flag) + ": no such file '" + path + "'");
}

void require_output(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  const auto parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) throw ConfigError(std::string(flag) + ": directory '" + parent.string() + "' does not exist");
}

Dataset load_data(const DataPaths& paths) { return load_idx_dataset(paths.images, paths.labels); }

void add_data_flags(CLI::App* cmd, DataPaths& paths) {
  cmd->add_option("--dataset-images", paths.images, "IDX image file");
  cmd->add_option("--dataset-labels", paths.labels, "IDX label file");
}

void add_eval_flags(CLI::App* cmd, DataPaths& paths) {
  cmd->add_option("--eval-images", paths.images, "IDX image file for held-out accuracy");
  cmd->add_option("--eval-labels", paths.labels, "IDX label file for held-out accuracy");
}

bool has_eval(const DataPaths& paths) {
  if (paths.images.empty() != paths.labels.empty()) throw ConfigError("--eval-images and --eval-labels go together");
  if (paths.images.empty()) return false;
  require_file(paths.images, "--eval-images");
  require_file(paths.labels, "--eval-labels");
  return true;
}

int cmd_synth(const Options& o) {
  require_output(o.data.images, "--dataset-images");
  require_output(o.data.labels, "--dataset-labels");
  if (o.count == 0) throw ConfigError("--count must be positive");
  write_idx_dataset(synthesize_digits(o.count, o.seed), o.data.images, o.data.labels);
  std::printf("wrote %zu samples to %s, %s\n", o.count, o.data.images.c_str(), o.data.labels.c_str());
  return kExitOk;
}

int cmd_train(const Options& o) {
  const auto spec = ModelSpec::make(parse_arch(o.arch));
  require_file(o.data.images, "--dataset-images");
  require_file(o.data.labels, "--dataset-labels");
  require_output(o.out, "--out");
  const bool eval = has_eval(o.eval);
  const auto data = load_data(o.data);

  TrainOptions topt;
  topt.epochs = o.train_epochs;
  topt.batch_size = o.train_batch;
  topt.learning_rate = o.train_lr;
  topt.seed = o.seed;
  const auto model = train_dense(spec, data, topt, nullptr, [](std::size_t epoch, double loss) {
    std::printf("epoch %zu loss %.6f\n", epoch + 1, loss);
    std::fflush(stdout);
  });
  save_model(model, o.out);
  std::printf("train top1 %.4f\n", evaluate(model, data));
  if (eval) std::printf("eval top1 %.4f\n", evaluate(model, load_data(o.eval)));
  std::printf("saved %s\n", o.out.c_str());
  return kExitOk;
}

CalibrationPlan make_plan(const Options& o) {
  CalibrationPlan plan;
  plan.target = o.target;
  plan.epochs = o.calib_epochs;
  plan.steps = o.steps;
  plan.batch_size = o.batch_size;
  plan.lr_thresholds = o.lr_thresholds;
  plan.lr_weights = o.lr_weights;
  plan.lambda_c = o.lambda_c;
  plan.kde.samples = o.kde_samples;
  plan.kde.bandwidth = o.kde_bandwidth;
  plan.seed = o.seed;
  plan.allocator = parse_allocator(o.allocator);
  plan.learn_rates = o.learn_rates.value_or(plan.allocator == AllocatorKind::fcpts);
  plan.reconstruct = !o.no_reconstruct;
  plan.project_to_target = o.project;
  plan.rate_source = parse_rate_source(o.rate_source);
  plan.validate();
  if (plan.learn_rates && plan.allocator != AllocatorKind::fcpts) {
    // Fixed allocators seed the learnable arm instead of fcpts' default.
    if (plan.allocator == AllocatorKind::l2norm) throw ConfigError("--learn-rates requires an erk or uniform start");
    plan.fcpts_init = plan.allocator;
    plan.allocator = AllocatorKind::fcpts;
  }
  return plan;
}

std::string config_echo(const Options& o, const CalibrationPlan& plan) {
  nlohmann::ordered_json j;
  j["command"] = "calibrate";
  j["checkpoint"] = o.checkpoint;
  j["dataset_images"] = o.data.images;
  j["dataset_labels"] = o.data.labels;
  j["eval_images"] = o.eval.images;
  j["eval_labels"] = o.eval.labels;
  j["calib_size"] = o.calib_size;
  j["out"] = o.out;
  j["target_sparsity"] = plan.target;
  j["allocator"] = o.allocator;
  j["learn_rates"] = plan.learn_rates;
  j["seed"] = o.seed;
  return j.dump();
}

int cmd_calibrate(const Options& o) {
  const auto plan = make_plan(o);
  require_file(o.checkpoint, "--checkpoint");
  require_file(o.data.images, "--dataset-images");
  require_file(o.data.labels, "--dataset-labels");
  require_output(o.out, "--out");
  if (o.report_dir.empty()) throw ConfigError("--report-dir is required");
  if (o.calib_size == 0) throw ConfigError("--calib-size must be positive");
  const bool eval = has_eval(o.eval);

  const auto dense = load_model(o.checkpoint);
  const auto pool = load_data(o.data);
  const auto idx = sample_indices(pool.size(), std::min(o.calib_size, pool.size()), o.seed);
  const auto calib = take(pool, idx);

  CalibrationResult result;
  try {
    result = calibrate(dense, calib, plan);
  } catch (const CalibrationDiverged& e) {
    emit_report(e.report(), o.report_dir, config_echo(o, plan));
    throw;
  }
  if (eval) {
    const auto data = load_data(o.eval);
    result.report.accuracy_dense = evaluate(dense, data);
    result.report.accuracy_sparse = evaluate(result.sparse, data);
  }
  save_sparse_model(result.sparse, o.out);
  emit_report(result.report, o.report_dir, config_echo(o, plan));

  std::printf("%-8s %10s %12s %8s\n", "layer", "N", "threshold", "rate");
  for (const auto& l : result.report.layers) {
    std::printf("%-8s %10zu %12.6f %8.4f\n", l.name.c_str(), l.count, l.threshold, l.rate);
  }
  std::printf("achieved rate %.4f (target %.4f)\n", result.report.achieved_rate, plan.target);
  if (eval) {
    std::printf("dense top1 %.4f\nsparse top1 %.4f\n", *result.report.accuracy_dense, *result.report.accuracy_sparse);
  }
  std::printf("saved %s, report in %s (%.1f s)\n", o.out.c_str(), o.report_dir.c_str(), result.report.wall_seconds);
  return kExitOk;
}

int cmd_eval(const Options& o) {
  require_file(o.model, "--model");
  require_file(o.data.images, "--dataset-images");
  require_file(o.data.labels, "--dataset-labels");
  const auto data = load_data(o.data);
  double acc = 0.0;
  std::string kind;
  if (is_sparse_model_file(o.model)) {
    const auto sparse = load_sparse_model(o.model);
    acc = evaluate(sparse, data);
    kind = "sparse";
    std::printf("model %s (sparse, rate %.4f)\n", o.model.c_str(), sparse.achieved_rate());
  } else {
    acc = evaluate(load_model(o.model), data);
    kind = "dense";
    std::printf("model %s (dense)\n", o.model.c_str());
  }
  std::printf("top1 %.4f\n", acc);
  if (!o.report_dir.empty()) {
    const nlohmann::ordered_json row{{"model", o.model}, {"kind", kind}, {"samples", data.size()}, {"top1", acc}};
    merge_report_field(fs::path(o.report_dir) / "eval.json", o.model, row.dump());
  }
  return kExitOk;
}

int cmd_bench(const Options& o) {
  require_file(o.model, "--model");
  require_file(o.checkpoint, "--checkpoint");
  if (o.bench_batch == 0 || o.bench_reps == 0) throw ConfigError("--batch and --reps must be positive");
  const auto sparse = load_sparse_model(o.model);
  const auto dense = load_model(o.checkpoint);
  if (sparse.spec.arch != dense.spec.arch) throw ConfigError("sparse model and checkpoint architectures differ");
  const auto data = synthesize_digits(o.bench_batch, o.seed);
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto r = bench(sparse, dense, make_batch(data, idx, dense.norm), o.bench_reps);
  std::printf("latency sparse %.3f ms\nlatency dense  %.3f ms\nspeedup %.2fx\n", r.latency_sparse_ms,
              r.latency_dense_ms, r.speedup);
  std::printf("bytes sparse %zu\nbytes dense  %zu\nmemory ratio %.4f\n", r.bytes_sparse, r.bytes_dense,
              static_cast<double>(r.bytes_sparse) / static_cast<double>(r.bytes_dense));
  if (!o.report_dir.empty()) merge_report_field(fs::path(o.report_dir) / "bench.json", o.model, bench_json(r, o.bench_batch));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparsecal: post-training sparsity calibration"};
  app.set_config("--config", "", "TOML/INI file with flag values; command-line flags take precedence");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic handwritten-digit set in IDX format");
  synth->add_option("--count", o.count, "Number of samples");
  synth->add_option("--seed", o.seed, "Generator seed");
  add_data_flags(synth, o.data);

  auto* train = app.add_subcommand("train", "Train a dense model and save a checkpoint");
  train->add_option("--arch", o.arch, "mlp-3x256 or cnn-2conv-2fc");
  add_data_flags(train, o.data);
  add_eval_flags(train, o.eval);
  train->add_option("--epochs", o.train_epochs, "Training epochs");
  train->add_option("--batch-size", o.train_batch, "Mini-batch size");
  train->add_option("--lr", o.train_lr, "Adam learning rate");
  train->add_option("--seed", o.seed, "Seed for initialization and shuffling");
  train->add_option("--out", o.out, "Checkpoint path");

  auto* cal = app.add_subcommand("calibrate", "Calibrate per-layer sparsity and emit a sparse model");
  cal->add_option("--checkpoint", o.checkpoint, "Dense checkpoint");
  add_data_flags(cal, o.data);
  add_eval_flags(cal, o.eval);
  cal->add_option("--calib-size", o.calib_size, "Calibration samples drawn from the dataset");
  cal->add_option("--target-sparsity", o.target, "Global sparsity rate in (0,1)");
  cal->add_option("--allocator", o.allocator, "fcpts, uniform, erk or l2norm");
  cal->add_option("--learn-rates", o.learn_rates, "Learn thresholds (default: true for fcpts only)");
  cal->add_flag("--no-reconstruct", o.no_reconstruct, "Skip weight reconstruction");
  cal->add_option("--steps", o.steps, "Step budget (overrides --epochs)");
  cal->add_option("--epochs", o.calib_epochs, "Passes over the calibration set");
  cal->add_option("--batch-size", o.batch_size, "Calibration mini-batch size");
  cal->add_option("--lr-thresholds", o.lr_thresholds, "Threshold learning rate (std-normalized)");
  cal->add_option("--lr-weights", o.lr_weights, "Weight learning rate");
  cal->add_option("--lambda-c", o.lambda_c, "Control loss weight");
  cal->add_option("--kde-samples", o.kde_samples, "KDE sample count per layer");
  cal->add_option("--kde-bandwidth", o.kde_bandwidth, "KDE bandwidth as a multiple of the layer weight std");
  cal->add_flag("--project-to-target", o.project, "Rescale thresholds to land within 0.001 of the target");
  cal->add_option("--rate-source", o.rate_source, "Control-loss rate: empirical or kde");
  cal->add_option("--seed", o.seed, "Calibration seed");
  cal->add_option("--out", o.out, "Sparse model path");
  cal->add_option("--report-dir", o.report_dir, "Directory for report.json and allocation.csv");

  auto* ev = app.add_subcommand("eval", "Top-1 accuracy of a dense checkpoint or sparse model");
  ev->add_option("--model", o.model, "Checkpoint or sparse model");
  add_data_flags(ev, o.data);
  ev->add_option("--report-dir", o.report_dir, "Append the result to <dir>/eval.json");

  auto* bn = app.add_subcommand("bench", "Latency and memory of a sparse model against its dense checkpoint");
  bn->add_option("--model", o.model, "Sparse model");
  bn->add_option("--checkpoint", o.checkpoint, "Dense checkpoint");
  bn->add_option("--batch", o.bench_batch, "Batch size");
  bn->add_option("--reps", o.bench_reps, "Timed repetitions (after 5 warmups)");
  bn->add_option("--seed", o.seed, "Seed of the synthetic input batch");
  bn->add_option("--report-dir", o.report_dir, "Append the result to <dir>/bench.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*cal) return cmd_calibrate(o);
    if (*ev) return cmd_eval(o);
    if (*bn) return cmd_bench(o);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
