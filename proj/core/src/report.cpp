// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sparsecal/error.hpp"

namespace sparsecal {

using nlohmann::ordered_json;

namespace {

ordered_json plan_json(const CalibrationPlan& p) {
  ordered_json j;
  j["target"] = p.target;
  j["epochs"] = p.epochs;
  j["steps"] = p.steps ? ordered_json(*p.steps) : ordered_json(nullptr);
  j["batch_size"] = p.batch_size;
  j["lr_thresholds"] = p.lr_thresholds;
  j["lr_weights"] = p.lr_weights;
  j["kde_samples"] = p.kde.samples;
  j["kde_bandwidth"] = p.kde.bandwidth;
  j["kde_bandwidth_relative"] = p.kde.relative;
  j["lambda_c"] = p.lambda_c;
  j["seed"] = p.seed;
  j["learn_rates"] = p.learn_rates;
  j["reconstruct"] = p.reconstruct;
  j["allocator"] = to_string(p.allocator);
  j["fcpts_init"] = to_string(p.fcpts_init);
  j["project_to_target"] = p.project_to_target;
  j["rate_source"] = to_string(p.rate_source);
  j["divergence_factor"] = p.divergence_factor;
  j["adaptive_control"] = p.adaptive_control;
  j["control_tolerance"] = p.control_tolerance;
  j["control_growth"] = p.control_growth;
  return j;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw ConfigError("cannot write " + path.string());
}

}  // namespace

std::string report_json(const CalibrationReport& report, const std::string& config_json) {
  ordered_json j;
  if (!config_json.empty()) {
    auto config = ordered_json::parse(config_json, nullptr, false);
    if (config.is_discarded() || !config.is_object()) throw FormatError("config echo is not a JSON object");
    j["config"] = std::move(config);
  }
  j["arch"] = report.arch;
  j["plan"] = plan_json(report.plan);
  j["normalization"] = {{"mean", report.norm.mean}, {"stddev", report.norm.stddev}};
  j["calib_size"] = report.calib_size;
  auto& steps = j["steps"] = ordered_json::array();
  for (const auto& s : report.steps) {
    steps.push_back(
        {{"step", s.step}, {"reconstruction", s.reconstruction}, {"control", s.control}, {"global_rate", s.global_rate},
                     {"control_weight", s.control_weight}});
  }
  auto& layers = j["allocation"] = ordered_json::array();
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const auto& l = report.layers[i];
    layers.push_back(
        {{"layer_index", i}, {"layer_name", l.name}, {"N", l.count}, {"threshold", l.threshold}, {"rate", l.rate}});
  }
  j["achieved_rate"] = report.achieved_rate;
  j["projection_scale"] = report.projection_scale;
  j["accuracy_dense"] = optional_number(report.accuracy_dense);
  j["accuracy_sparse"] = optional_number(report.accuracy_sparse);
  return j.dump(2) + "\n";
}

std::string allocation_csv(const CalibrationReport& report) {
  std::ostringstream out;
  out << "layer_index,layer_name,N,threshold,rate\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const auto& l = report.layers[i];
    out << i << ',' << l.name << ',' << l.count << ',' << l.threshold << ',' << l.rate << '\n';
  }
  return out.str();
}

std::string timing_json(double wall_seconds) { return ordered_json{{"wall_seconds", wall_seconds}}.dump(2) + "\n"; }

std::string bench_json(const BenchResult& r, std::size_t batch) {
  ordered_json j;
  j["batch"] = batch;
  j["latency_sparse_ms"] = r.latency_sparse_ms;
  j["latency_dense_ms"] = r.latency_dense_ms;
  j["speedup"] = r.speedup;
  j["bytes_sparse"] = r.bytes_sparse;
  j["bytes_dense"] = r.bytes_dense;
  j["memory_ratio"] = r.bytes_dense > 0 ? static_cast<double>(r.bytes_sparse) / static_cast<double>(r.bytes_dense) : 0.0;
  return j.dump();
}

void emit_report(const CalibrationReport& report, const std::filesystem::path& dir, const std::string& config_json) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create report directory " + dir.string());
  write_text(dir / "report.json", report_json(report, config_json));
  write_text(dir / "allocation.csv", allocation_csv(report));
  write_text(dir / "timing.json", timing_json(report.wall_seconds));
}

void merge_report_field(const std::filesystem::path& path, const std::string& key, const std::string& value_json) {
  ordered_json doc = ordered_json::object();
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw FormatError(path.string() + " is not a JSON object");
  }
  auto value = ordered_json::parse(value_json, nullptr, false);
  if (value.is_discarded()) throw FormatError("report field '" + key + "' is not valid JSON");
  doc[key] = std::move(value);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace sparsecal
