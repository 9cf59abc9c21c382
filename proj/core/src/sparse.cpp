// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparsecal/sparse.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sparsecal/checkpoint.hpp"
#include "sparsecal/error.hpp"
#include "sparsecal/train.hpp"

namespace sparsecal {

namespace {

std::pair<std::size_t, std::size_t> matrix_extent(const Shape& shape) {
  if (shape.empty()) throw DimensionError("cannot view an empty shape as a matrix");
  return {shape.front(), numel(shape) / shape.front()};
}

}  // namespace

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Index> row_ptr, std::vector<Column> col_idx,
                     std::vector<float> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
  if (cols_ > kMaxCols) throw ContractError("CSR column count " + std::to_string(cols_) + " exceeds 65535");
  if (row_ptr_.size() != rows_ + 1) throw ContractError("CSR row_ptr must hold rows + 1 entries");
  if (row_ptr_.front() != 0) throw ContractError("CSR row_ptr must start at 0");
  if (col_idx_.size() != values_.size()) throw ContractError("CSR col_idx and values differ in length");
  if (row_ptr_.back() != values_.size()) throw ContractError("CSR row_ptr must end at nnz");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) throw ContractError("CSR row_ptr must be non-decreasing");
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (col_idx_[k] >= cols_) throw ContractError("CSR column index out of range");
      if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) {
        throw ContractError("CSR columns must strictly increase within a row");
      }
      if (values_[k] == 0.0f) throw ContractError("CSR stores an explicit zero");
    }
  }
}

CsrMatrix CsrMatrix::from_dense(const Tensor& weights, const Tensor& mask) {
  if (!weights.same_shape(mask)) {
    throw DimensionError("mask shape " + to_string(mask.shape()) + " differs from weights " +
                         to_string(weights.shape()));
  }
  const auto [rows, cols] = matrix_extent(weights.shape());
  if (cols > kMaxCols) throw ContractError("CSR column count " + std::to_string(cols) + " exceeds 65535");
  std::vector<Index> row_ptr(rows + 1, 0);
  std::vector<Column> col_idx;
  std::vector<float> values;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      const auto v = static_cast<float>(weights[i]);
      if (mask[i] != 0.0 && v != 0.0f) {
        col_idx.push_back(static_cast<Column>(c));
        values.push_back(v);
      }
    }
    row_ptr[r + 1] = static_cast<Index>(values.size());
  }
  return CsrMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

std::size_t CsrMatrix::bytes() const noexcept {
  return nnz() * (sizeof(float) + sizeof(Column)) + row_ptr_.size() * sizeof(Index);
}

Tensor CsrMatrix::to_dense() const {
  Tensor out({std::max<std::size_t>(rows_, 1), std::max<std::size_t>(cols_, 1)});
  for (std::size_t r = 0; r < rows_; ++r) {
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[r * cols_ + col_idx_[k]] = values_[k];
  }
  return out;
}

Tensor CsrMatrix::spmv(const Tensor& x) const {
  if (x.size() != cols_) {
    throw DimensionError("spmv expects " + std::to_string(cols_) + " inputs, got " + std::to_string(x.size()));
  }
  Tensor y({rows_});
  multiply(x.raw(), 1, y.raw());
  return y;
}

Tensor CsrMatrix::spmm(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(0) != cols_) {
    throw DimensionError("spmm expects a [" + std::to_string(cols_) + "×n] operand, got " + to_string(x.shape()));
  }
  const std::size_t n = x.dim(1);
  Tensor y({rows_, n});
  multiply(x.raw(), n, y.raw());
  return y;
}

template <typename T>
void CsrMatrix::multiply(const T* x, std::size_t n, T* y) const {
  std::fill(y, y + rows_ * n, T{0});
  for (std::size_t r = 0; r < rows_; ++r) {
    T* yr = y + r * n;
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const T v = static_cast<T>(values_[k]);
      const T* xr = x + static_cast<std::size_t>(col_idx_[k]) * n;
      for (std::size_t j = 0; j < n; ++j) yr[j] += v * xr[j];
    }
  }
}

template void CsrMatrix::multiply<float>(const float*, std::size_t, float*) const;
template void CsrMatrix::multiply<double>(const double*, std::size_t, double*) const;

DenseMatrix::DenseMatrix(const Tensor& weights) {
  std::tie(rows_, cols_) = matrix_extent(weights.shape());
  values_.resize(weights.size());
  std::transform(weights.data().begin(), weights.data().end(), values_.begin(),
                 [](double v) { return static_cast<float>(v); });
}

template <typename T>
void DenseMatrix::multiply(const T* x, std::size_t n, T* y) const {
  std::fill(y, y + rows_ * n, T{0});
  for (std::size_t r = 0; r < rows_; ++r) {
    T* yr = y + r * n;
    const float* wr = values_.data() + r * cols_;
    for (std::size_t c = 0; c < cols_; ++c) {
      const T v = static_cast<T>(wr[c]);
      const T* xr = x + c * n;
      for (std::size_t j = 0; j < n; ++j) yr[j] += v * xr[j];
    }
  }
}

template void DenseMatrix::multiply<float>(const float*, std::size_t, float*) const;
template void DenseMatrix::multiply<double>(const double*, std::size_t, double*) const;

namespace {

// Activations travel either image-major ([B][C·H·W]) between conv layers or
// feature-major ([F×B]) between dense layers.
template <typename Matrix, typename T>
void run_layers(const ModelSpec& spec, const std::vector<RuntimeLayer<Matrix>>& layers, const T* input,
                std::size_t batch, T* logits, Workspace<T>& ws) {
  std::size_t channels = spec.input_shape[0], height = spec.input_shape[1], width = spec.input_shape[2];
  std::size_t features = channels * height * width;
  bool feature_major = false;
  ws.a.assign(input, input + batch * features);

  for (const auto& layer : layers) {
    if (layer.spec.kind == LayerKind::conv) {
      if (feature_major) throw ContractError("conv layer after a dense layer is unsupported");
      const auto& ks = layer.spec.weight_shape;
      const kernels::ConvGeometry g{channels, height, width, ks[2], ks[3], layer.spec.stride, layer.spec.padding};
      const std::size_t out_c = ks[0], spatial = g.out_h() * g.out_w();
      ws.columns.resize(g.patch() * spatial);
      ws.b.resize(batch * out_c * spatial);
      for (std::size_t b = 0; b < batch; ++b) {
        kernels::im2col(g, ws.a.data() + b * features, ws.columns.data());
        T* out = ws.b.data() + b * out_c * spatial;
        layer.weight.multiply(ws.columns.data(), spatial, out);
        for (std::size_t c = 0; c < out_c; ++c) {
          const T bias = static_cast<T>(layer.bias[c]);
          for (std::size_t s = 0; s < spatial; ++s) {
            T& v = out[c * spatial + s];
            v += bias;
            if (layer.spec.relu && v < T{0}) v = T{0};
          }
        }
      }
      channels = out_c;
      height = g.out_h();
      width = g.out_w();
      features = out_c * spatial;
    } else {
      if (!feature_major) {
        ws.b.resize(ws.a.size());
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t f = 0; f < features; ++f) ws.b[f * batch + b] = ws.a[b * features + f];
        }
        std::swap(ws.a, ws.b);
        feature_major = true;
      }
      const std::size_t out = layer.weight.rows();
      ws.b.resize(out * batch);
      layer.weight.multiply(ws.a.data(), batch, ws.b.data());
      for (std::size_t r = 0; r < out; ++r) {
        const T bias = static_cast<T>(layer.bias[r]);
        T* row = ws.b.data() + r * batch;
        for (std::size_t j = 0; j < batch; ++j) {
          row[j] += bias;
          if (layer.spec.relu && row[j] < T{0}) row[j] = T{0};
        }
      }
      features = out;
    }
    std::swap(ws.a, ws.b);
  }

  if (feature_major) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < features; ++f) logits[b * features + f] = ws.a[f * batch + b];
    }
  } else {
    std::copy(ws.a.begin(), ws.a.begin() + batch * features, logits);
  }
}

std::size_t input_features(const ModelSpec& spec) { return numel(spec.input_shape); }

std::size_t check_batch(const ModelSpec& spec, std::size_t input_size, std::size_t batch) {
  if (batch == 0 || input_size != batch * input_features(spec)) {
    throw DimensionError("runtime input holds " + std::to_string(input_size) + " values, expected batch × " +
                         std::to_string(input_features(spec)));
  }
  return batch;
}

std::vector<float> to_floats(const Tensor& t) {
  std::vector<float> out(t.size());
  std::transform(t.data().begin(), t.data().end(), out.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

}  // namespace

SparseModel SparseModel::build(const Model& model, std::span<const Tensor> masks) {
  model.spec.validate();
  if (masks.size() != model.weights.size()) {
    throw ContractError("expected " + std::to_string(model.weights.size()) + " masks, got " +
                        std::to_string(masks.size()));
  }
  SparseModel out;
  out.spec = model.spec;
  out.norm = model.norm;
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const auto& mask = masks[l];
    out.layers.push_back({model.spec.layers[l], CsrMatrix::from_dense(model.weights[l], mask),
                          to_floats(model.biases[l])});
    const auto kept = std::count_if(mask.data().begin(), mask.data().end(), [](double m) { return m != 0.0; });
    out.rates.push_back(1.0 - static_cast<double>(kept) / static_cast<double>(mask.size()));
  }
  return out;
}

Tensor SparseModel::forward(const Tensor& input) const {
  if (input.rank() == 0) throw DimensionError("runtime input is empty");
  const std::size_t batch = check_batch(spec, input.size(), input.dim(0));
  Workspace<double> ws;
  Tensor logits({batch, spec.classes});
  run_layers(spec, layers, input.raw(), batch, logits.raw(), ws);
  return logits;
}

void SparseModel::forward_f32(std::span<const float> input, std::size_t batch, std::vector<float>& logits,
                              Workspace<float>& ws) const {
  check_batch(spec, input.size(), batch);
  logits.resize(batch * spec.classes);
  run_layers(spec, layers, input.data(), batch, logits.data(), ws);
}

Model SparseModel::to_dense() const {
  Model out;
  out.spec = spec;
  out.norm = norm;
  for (const auto& layer : layers) {
    out.weights.push_back(layer.weight.to_dense().reshaped(layer.spec.weight_shape));
    std::vector<double> bias(layer.bias.begin(), layer.bias.end());
    out.biases.emplace_back(Shape{bias.size()}, std::move(bias));
  }
  return out;
}

std::size_t SparseModel::weight_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.weight.rows() * layer.weight.cols();
  return total;
}

std::size_t SparseModel::nnz() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.weight.nnz();
  return total;
}

std::size_t SparseModel::bytes() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.weight.bytes() + layer.bias.size() * sizeof(float);
  return total;
}

double SparseModel::achieved_rate() const {
  double pruned = 0.0, total = 0.0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double n = static_cast<double>(layers[l].weight.rows() * layers[l].weight.cols());
    pruned += rates[l] * n;
    total += n;
  }
  return total > 0.0 ? pruned / total : 0.0;
}

DenseRuntime::DenseRuntime(const Model& model) : spec(model.spec) {
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    layers.push_back({model.spec.layers[l], DenseMatrix(model.weights[l]), to_floats(model.biases[l])});
  }
}

void DenseRuntime::forward_f32(std::span<const float> input, std::size_t batch, std::vector<float>& logits,
                               Workspace<float>& ws) const {
  check_batch(spec, input.size(), batch);
  logits.resize(batch * spec.classes);
  run_layers(spec, layers, input.data(), batch, logits.data(), ws);
}

std::size_t DenseRuntime::bytes() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.weight.bytes() + layer.bias.size() * sizeof(float);
  return total;
}

std::size_t dense_bytes(const Model& model) {
  std::size_t total = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    total += (model.weights[l].size() + model.biases[l].size()) * sizeof(float);
  }
  return total;
}

double evaluate(const SparseModel& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ContractError("cannot evaluate on an empty dataset");
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto predicted = argmax_rows(model.forward(make_batch(data, idx, model.norm)));
    for (std::size_t i = 0; i < idx.size(); ++i) correct += predicted[i] == data.labels[idx[i]];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<std::uint8_t> encode_sparse_model(const SparseModel& model) {
  std::vector<std::uint8_t> out(std::begin(kSparseMagic), std::end(kSparseMagic));
  io::put_u32(out, kSparseVersion);
  io::put_string(out, to_string(model.spec.arch));
  io::put_f64(out, model.norm.mean);
  io::put_f64(out, model.norm.stddev);
  io::put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const auto& w = layer.weight;
    io::put_string(out, layer.spec.name);
    io::put_u32(out, static_cast<std::uint32_t>(w.rows()));
    io::put_u32(out, static_cast<std::uint32_t>(w.cols()));
    io::put_u32(out, static_cast<std::uint32_t>(w.nnz()));
    io::put_f64(out, model.rates[l]);
    for (auto v : w.row_ptr()) io::put_u32(out, v);
    for (auto v : w.col_idx()) io::put_u16(out, v);
    for (auto v : w.values()) io::put_f32(out, v);
    io::put_u32(out, static_cast<std::uint32_t>(layer.bias.size()));
    for (auto v : layer.bias) io::put_f32(out, v);
  }
  return out;
}

SparseModel decode_sparse_model(std::span<const std::uint8_t> bytes) {
  io::Reader in(bytes);
  in.expect(kSparseMagic, "sparse model");
  const auto version = in.u32();
  if (version != kSparseVersion) throw FormatError("unsupported sparse model version " + std::to_string(version));
  SparseModel model;
  try {
    model.spec = ModelSpec::make(parse_arch(in.string()));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  model.norm.mean = in.f64();
  model.norm.stddev = in.f64();
  const auto count = in.u32();
  if (count != model.spec.layers.size()) throw FormatError("sparse model layer count does not match architecture");
  for (std::size_t l = 0; l < count; ++l) {
    const auto& spec = model.spec.layers[l];
    const auto name = in.string();
    if (name != spec.name) throw FormatError("unexpected layer '" + name + "', expected '" + spec.name + "'");
    const std::size_t rows = in.u32(), cols = in.u32(), nnz = in.u32();
    const auto [want_rows, want_cols] = matrix_extent(spec.weight_shape);
    if (rows != want_rows || cols != want_cols) throw FormatError("layer " + name + " has the wrong extent");
    if (nnz > rows * cols) throw FormatError("layer " + name + " has more non-zeros than entries");
    const double rate = in.f64();
    if (!(rate >= 0.0 && rate <= 1.0)) throw FormatError("layer " + name + " has an invalid rate");
    if (in.remaining() < (rows + 1) * 4 + nnz * 6) throw FormatError("unexpected end of data");
    std::vector<CsrMatrix::Index> row_ptr(rows + 1);
    std::vector<CsrMatrix::Column> col_idx(nnz);
    std::vector<float> values(nnz);
    for (auto& v : row_ptr) v = in.u32();
    for (auto& v : col_idx) v = in.u16();
    for (auto& v : values) v = in.f32();
    const std::size_t bias_count = in.u32();
    if (bias_count != spec.out_features()) throw FormatError("layer " + name + " has the wrong bias length");
    std::vector<float> bias(bias_count);
    for (auto& v : bias) v = in.f32();
    try {
      model.layers.push_back({spec, CsrMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values)),
                              std::move(bias)});
    } catch (const ContractError& e) {
      throw FormatError(std::string("layer ") + name + ": " + e.what());
    }
    model.rates.push_back(rate);
  }
  if (!in.done()) throw FormatError("trailing bytes after sparse model");
  return model;
}

void save_sparse_model(const SparseModel& model, const std::filesystem::path& path) {
  io::write_file(path, encode_sparse_model(model));
}

SparseModel load_sparse_model(const std::filesystem::path& path) { return decode_sparse_model(io::read_file(path)); }

bool is_sparse_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[sizeof(kSparseMagic)] = {};
  return in.read(magic, sizeof(magic)) && std::memcmp(magic, kSparseMagic, sizeof(magic)) == 0;
}

double median_latency_ms(const std::function<void()>& fn, std::size_t repetitions, std::size_t warmup) {
  if (repetitions == 0) throw ParameterError("repetitions must be positive");
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> samples(repetitions);
  for (auto& s : samples) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    s = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  return *mid;
}

BenchResult bench(const SparseModel& sparse, const Model& dense, const Tensor& batch, std::size_t repetitions,
                  std::size_t warmup) {
  if (batch.rank() == 0) throw DimensionError("benchmark batch is empty");
  const std::size_t n = batch.dim(0);
  const auto input = to_floats(batch);
  const DenseRuntime dense_rt(dense);
  std::vector<float> logits;
  Workspace<float> ws;
  BenchResult r;
  r.latency_sparse_ms = median_latency_ms([&] { sparse.forward_f32(input, n, logits, ws); }, repetitions, warmup);
  r.latency_dense_ms = median_latency_ms([&] { dense_rt.forward_f32(input, n, logits, ws); }, repetitions, warmup);
  r.speedup = r.latency_sparse_ms > 0.0 ? r.latency_dense_ms / r.latency_sparse_ms : 0.0;
  r.bytes_sparse = sparse.bytes();
  r.bytes_dense = dense_bytes(dense);
  return r;
}

}  // namespace sparsecal
