// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sparsecal/tensor.hpp"

namespace sparsecal {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kClassCount = 10;

/// Grayscale image classification set held as raw bytes.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> images;  // size() * rows * cols, row-major per image
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t pixels() const noexcept { return rows * cols; }
};

/// Per-pixel affine normalization x ↦ (x/255 − mean)/stddev.
struct Normalization {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Parses an IDX image file (magic 0x00000803, big-endian count/rows/cols)
/// and an IDX label file (magic 0x00000801). Throws FormatError on bad magic,
/// truncation, count mismatch or labels outside [0, 10).
Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes);
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);

std::vector<std::uint8_t> encode_idx_images(const Dataset& data);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& data);
void write_idx_dataset(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

/// Mean and standard deviation of all pixels scaled to [0,1].
Normalization fit_normalization(const Dataset& data);

/// Normalized [B×1×rows×cols] batch of the given samples.
Tensor make_batch(const Dataset& data, std::span<const std::size_t> indices, const Normalization& norm);

Dataset take(const Dataset& data, std::span<const std::size_t> indices);

/// `count` distinct indices from [0, size), in seeded random order.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, std::uint64_t seed);

/// Procedurally rendered 28×28 handwritten-style digits with random affine
/// distortion, stroke jitter and noise. Deterministic in `seed`.
Dataset synthesize_digits(std::size_t count, std::uint64_t seed);

}  // namespace sparsecal
