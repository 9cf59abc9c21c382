// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "sparsecal/checkpoint.hpp"
#include "sparsecal/dataset.hpp"
#include "sparsecal/error.hpp"
#include "sparsecal/masking.hpp"
#include "sparsecal/model.hpp"
#include "sparsecal/train.hpp"
#include "support.hpp"

namespace sparsecal {
namespace {

using testing::TempDir;

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

std::vector<std::uint8_t> label_file(std::uint32_t magic, std::vector<std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t v : {magic, static_cast<std::uint32_t>(labels.size())}) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> image_file(std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t v : {kIdxImageMagic, count, rows, cols}) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) out.push_back(static_cast<std::uint8_t>(i * 7));
  return out;
}

TEST(Idx, ParsesHandBuiltFiles) {
  const auto data = parse_idx(image_file(10, 2, 3), label_file(kIdxLabelMagic, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(data.size(), 10u);
  EXPECT_EQ(data.rows, 2u);
  EXPECT_EQ(data.cols, 3u);
  EXPECT_EQ(data.labels[9], 9);
  EXPECT_EQ(data.images[5], static_cast<std::uint8_t>(35));
}

TEST(Idx, BadMagicIsFormatError) {
  EXPECT_THROW(parse_idx(image_file(1, 2, 2), label_file(0x00000803, {1})), FormatError);
  auto images = image_file(1, 2, 2);
  images[3] = 0x01;
  EXPECT_THROW(parse_idx(images, label_file(kIdxLabelMagic, {1})), FormatError);
}

TEST(Idx, TruncationIsFormatError) {
  auto images = image_file(2, 4, 4);
  images.pop_back();
  EXPECT_THROW(parse_idx(images, label_file(kIdxLabelMagic, {1, 2})), FormatError);
  auto labels = label_file(kIdxLabelMagic, {1, 2});
  labels.pop_back();
  EXPECT_THROW(parse_idx(image_file(2, 4, 4), labels), FormatError);
  EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0, 8}, labels), FormatError);
}

TEST(Idx, CountMismatchAndBadLabelAreErrors) {
  EXPECT_THROW(parse_idx(image_file(3, 2, 2), label_file(kIdxLabelMagic, {1, 2})), FormatError);
  EXPECT_THROW(parse_idx(image_file(1, 2, 2), label_file(kIdxLabelMagic, {10})), FormatError);
}

TEST(Idx, MissingFileIsConfigError) {
  EXPECT_THROW(load_idx_dataset("/nonexistent/images", "/nonexistent/labels"), ConfigError);
}

TEST(Idx, TenThousandImageFileRoundTrips) {
  TempDir dir("idx");
  const auto data = synthesize_digits(10000, 3);
  write_idx_dataset(data, dir / "images", dir / "labels");

  // Independent header read straight from the bytes on disk.
  const auto raw = io::read_file(dir / "images");
  EXPECT_EQ(be32(raw, 0), 0x00000803u);
  EXPECT_EQ(be32(raw, 4), 10000u);
  EXPECT_EQ(be32(raw, 8), 28u);
  EXPECT_EQ(be32(raw, 12), 28u);
  EXPECT_EQ(raw.size(), 16u + 10000u * 28u * 28u);
  const auto lab = io::read_file(dir / "labels");
  EXPECT_EQ(be32(lab, 0), 0x00000801u);
  EXPECT_EQ(be32(lab, 4), 10000u);

  const auto back = load_idx_dataset(dir / "images", dir / "labels");
  EXPECT_EQ(back.size(), 10000u);
  EXPECT_EQ(back.rows * back.cols, 784u);
  EXPECT_EQ(back.images, data.images);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_EQ(encode_idx_images(back), raw);
}

TEST(Synthetic, DeterministicAndBalanced) {
  const auto a = synthesize_digits(2000, 9), b = synthesize_digits(2000, 9), c = synthesize_digits(2000, 10);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.images, c.images);
  std::vector<int> hist(kClassCount, 0);
  for (auto l : a.labels) ++hist[l];
  for (int h : hist) EXPECT_GT(h, 150);
}

TEST(Dataset, NormalizationAndBatches) {
  const auto data = synthesize_digits(64, 1);
  const auto norm = fit_normalization(data);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const auto batch = make_batch(data, all, norm);
  EXPECT_EQ(batch.shape(), (Shape{64, 1, 28, 28}));
  double mean = 0.0, sq = 0.0;
  for (double v : batch.data()) mean += v;
  mean /= static_cast<double>(batch.size());
  for (double v : batch.data()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(sq / static_cast<double>(batch.size()), 1.0, 1e-9);

  const auto idx = sample_indices(64, 10, 5);
  EXPECT_EQ(idx, sample_indices(64, 10, 5));
  EXPECT_EQ(take(data, idx).size(), 10u);
}

TEST(ModelSpec, ShapesChainAndEndInClasses) {
  for (auto arch : {Arch::mlp_3x256, Arch::cnn_2conv_2fc}) {
    const auto spec = ModelSpec::make(arch);
    EXPECT_NO_THROW(spec.validate());
    EXPECT_EQ(spec.layers.back().out_features(), kClassCount);
    EXPECT_EQ(parse_arch(to_string(arch)), arch);
  }
  EXPECT_THROW(parse_arch("resnet"), ConfigError);
  auto broken = ModelSpec::make(Arch::mlp_3x256);
  broken.layers[1].weight_shape = {256, 100};
  EXPECT_THROW(broken.validate(), DimensionError);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  TempDir dir("ckpt");
  for (auto arch : {Arch::mlp_3x256, Arch::cnn_2conv_2fc}) {
    auto model = Model::initialize(ModelSpec::make(arch), 3);
    round_to_float(model);
    model.norm = {0.125, 0.3};
    save_model(model, dir / "m.ckpt");
    const auto back = load_model(dir / "m.ckpt");
    EXPECT_EQ(back.weights, model.weights);
    EXPECT_EQ(back.biases, model.biases);
    EXPECT_EQ(back.norm.mean, model.norm.mean);
    EXPECT_EQ(back.spec.arch, arch);
    EXPECT_EQ(load_checkpoint(dir / "m.ckpt"), to_checkpoint(model));
  }
}

TEST(Checkpoint, ZeroTensorRoundTrip) {
  Checkpoint c{"mlp-3x256", {{"zeros", {3, 2}, std::vector<float>(6, 0.0f)}, {"neg", {1}, {-0.0f}}}};
  const auto back = decode_checkpoint(encode_checkpoint(c));
  EXPECT_EQ(back, c);
  EXPECT_TRUE(std::signbit(back.records[1].values[0]));
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(Checkpoint{"x", {}})).records.size(), 0u);
}

TEST(Checkpoint, CorruptionIsFormatError) {
  const Checkpoint c{"mlp-3x256", {{"w", {2}, {1.0f, 2.0f}}}};
  auto bytes = encode_checkpoint(c);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
}

TEST(Checkpoint, MissingRecordIsFormatError) {
  auto model = Model::initialize(ModelSpec::make(Arch::mlp_3x256), 1);
  auto c = to_checkpoint(model);
  c.records.pop_back();
  EXPECT_THROW(model_from_checkpoint(c), FormatError);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto data = synthesize_digits(32, 1);
  const auto spec = ModelSpec::make(Arch::mlp_3x256);
  auto init = Model::initialize(spec, 4);
  round_to_float(init);
  const auto trained = train_dense(spec, data, {0, 16, 1e-3, 4});
  EXPECT_EQ(trained.weights, init.weights);
  EXPECT_EQ(trained.biases, init.biases);
}

TEST(Train, SameSeedGivesIdenticalCheckpoint) {
  TempDir dir("train");
  const auto data = synthesize_digits(256, 2);
  const auto spec = ModelSpec::make(Arch::cnn_2conv_2fc);
  const TrainOptions opt{1, 32, 1e-3, 11};
  save_model(train_dense(spec, data, opt), dir / "a");
  save_model(train_dense(spec, data, opt), dir / "b");
  EXPECT_EQ(io::read_file(dir / "a"), io::read_file(dir / "b"));
  save_model(train_dense(spec, data, {1, 32, 1e-3, 12}), dir / "c");
  EXPECT_NE(io::read_file(dir / "a"), io::read_file(dir / "c"));
}

TEST(Train, DivergenceIsReported) {
  const auto data = synthesize_digits(64, 2);
  EXPECT_THROW(train_dense(ModelSpec::make(Arch::mlp_3x256), data, {2, 16, 1e300, 1}), DivergenceError);
}

TEST(Train, MlpReachesReferenceAccuracy) {
  const auto train = synthesize_digits(12000, 1);
  const auto test = synthesize_digits(2000, 2);
  const auto model = train_dense(ModelSpec::make(Arch::mlp_3x256), train, {5, 64, 1e-3, 7});
  EXPECT_GE(evaluate(model, test), 0.97);
}

TEST(Evaluate, ConstantPredictorScoresClassFrequency) {
  const auto data = synthesize_digits(3000, 3);
  auto model = Model::initialize(ModelSpec::make(Arch::mlp_3x256), 1);
  for (auto& w : model.weights) w.fill(0.0);
  model.biases.back()[4] = 1.0;
  const double acc = evaluate(model, data);
  EXPECT_NEAR(acc, 0.1, 0.02);
}

TEST(Evaluate, RangeAndAllOnesMaskParity) {
  const auto data = synthesize_digits(300, 4);
  auto model = train_dense(ModelSpec::make(Arch::mlp_3x256), data, {1, 32, 1e-3, 2});
  const double dense = evaluate(model, data);
  EXPECT_GE(dense, 0.0);
  EXPECT_LE(dense, 1.0);
  std::vector<MaskSpec> ones;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    ones.push_back({model.spec.layers[l].name, 0.0, Tensor(model.weights[l].shape(), 1.0)});
  }
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const auto x = make_batch(data, all, model.norm);
  EXPECT_EQ(argmax_rows(masked_forward(model, x, ones)), argmax_rows(forward(model, x)));
  EXPECT_EQ(top1(masked_forward(model, x, ones), data.labels), dense);
}

}  // namespace
}  // namespace sparsecal
