// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "sparsecal/error.hpp"

namespace sparsecal {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("IDX header truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("short write to " + path.string());
}

std::string hex(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t image_magic = read_be32(image_bytes, 0);
  if (image_magic != kIdxImageMagic) throw FormatError("bad IDX image magic " + hex(image_magic));
  const std::uint32_t label_magic = read_be32(label_bytes, 0);
  if (label_magic != kIdxLabelMagic) throw FormatError("bad IDX label magic " + hex(label_magic));

  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t label_count = read_be32(label_bytes, 4);
  if (count != label_count) {
    throw FormatError("image count " + std::to_string(count) + " != label count " + std::to_string(label_count));
  }
  const std::size_t payload = count * rows * cols;
  if (image_bytes.size() < 16 + payload) throw FormatError("IDX image payload truncated");
  if (label_bytes.size() < 8 + count) throw FormatError("IDX label payload truncated");

  Dataset data;
  data.rows = rows;
  data.cols = cols;
  data.images.assign(image_bytes.begin() + 16, image_bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  data.labels.assign(label_bytes.begin() + 8, label_bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (auto label : data.labels) {
    if (label >= kClassCount) throw FormatError("label " + std::to_string(label) + " outside [0,10)");
  }
  return data;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  return parse_idx(image_bytes, label_bytes);
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + data.images.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(data.size()));
  write_be32(out, static_cast<std::uint32_t>(data.rows));
  write_be32(out, static_cast<std::uint32_t>(data.cols));
  out.insert(out.end(), data.images.begin(), data.images.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& data) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + data.labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(data.size()));
  out.insert(out.end(), data.labels.begin(), data.labels.end());
  return out;
}

void write_idx_dataset(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  write_file(images, encode_idx_images(data));
  write_file(labels, encode_idx_labels(data));
}

Normalization fit_normalization(const Dataset& data) {
  if (data.images.empty()) throw ContractError("cannot normalize an empty dataset");
  double sum = 0.0, sq = 0.0;
  for (auto px : data.images) {
    const double v = px / 255.0;
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(data.images.size());
  const double mean = sum / n;
  const double var = std::max(sq / n - mean * mean, 0.0);
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

Tensor make_batch(const Dataset& data, std::span<const std::size_t> indices, const Normalization& norm) {
  if (indices.empty()) throw ContractError("empty batch");
  const std::size_t px = data.pixels();
  Tensor batch({indices.size(), 1, data.rows, data.cols});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= data.size()) throw ContractError("batch index out of range");
    const std::uint8_t* src = data.images.data() + indices[b] * px;
    double* dst = batch.raw() + b * px;
    for (std::size_t i = 0; i < px; ++i) dst[i] = (src[i] / 255.0 - norm.mean) / norm.stddev;
  }
  return batch;
}

Dataset take(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.rows = data.rows;
  out.cols = data.cols;
  const std::size_t px = data.pixels();
  out.images.reserve(indices.size() * px);
  for (auto i : indices) {
    if (i >= data.size()) throw ContractError("subset index out of range");
    out.images.insert(out.images.end(), data.images.begin() + static_cast<std::ptrdiff_t>(i * px),
                      data.images.begin() + static_cast<std::ptrdiff_t>((i + 1) * px));
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, std::uint64_t seed) {
  if (count > size) throw ContractError("cannot draw " + std::to_string(count) + " of " + std::to_string(size) + " samples");
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return all;
}

}  // namespace sparsecal
