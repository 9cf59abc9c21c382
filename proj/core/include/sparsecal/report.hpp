// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "sparsecal/allocator.hpp"
#include "sparsecal/sparse.hpp"

namespace sparsecal {

/// Self-describing JSON document: config echo, step series, per-layer
/// allocation, achieved rate, accuracies. Wall-clock time is excluded so the
/// document depends only on the inputs.
///
/// `config_json` must be a JSON object (or empty for none); it is embedded
/// verbatim under "config".
std::string report_json(const CalibrationReport& report, const std::string& config_json = "");

/// Header `layer_index,layer_name,N,threshold,rate` plus one row per layer.
std::string allocation_csv(const CalibrationReport& report);

/// {"wall_seconds": ...}
std::string timing_json(double wall_seconds);

/// Benchmark metrics as a JSON object.
std::string bench_json(const BenchResult& result, std::size_t batch);

/// Writes report.json, allocation.csv and timing.json into `dir`, creating
/// it if needed. Throws ConfigError when the directory is not writable.
void emit_report(const CalibrationReport& report, const std::filesystem::path& dir,
                 const std::string& config_json = "");

/// Adds or replaces `key` in the JSON object stored at `path` (created when
/// missing). Throws ConfigError on I/O failure and FormatError when the file
/// is not a JSON object.
void merge_report_field(const std::filesystem::path& path, const std::string& key, const std::string& value_json);

}  // namespace sparsecal
