// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "sparsecal/model.hpp"
#include "sparsecal/tensor.hpp"

namespace sparsecal {

/// Compressed sparse row matrix with 32-bit float values, 32-bit row
/// pointers and 16-bit column indices (so at most 65535 columns).
///
/// Invariants: row_ptr[0] = 0, row_ptr is non-decreasing, row_ptr[rows] =
/// nnz, columns strictly increase within a row, every value is non-zero.
/// Immutable once built; safe to share read-only.
class CsrMatrix {
 public:
  using Index = std::uint32_t;
  using Column = std::uint16_t;
  static constexpr std::size_t kMaxCols = 65535;

  CsrMatrix() = default;
  /// Validates the invariants, throwing ContractError on violation.
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<Index> row_ptr, std::vector<Column> col_idx,
            std::vector<float> values);

  /// Keeps entries with mask = 1 and a non-zero (float) value. Tensors of
  /// rank > 2 are flattened to [shape[0] × rest].
  static CsrMatrix from_dense(const Tensor& weights, const Tensor& mask);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  std::span<const Index> row_ptr() const noexcept { return row_ptr_; }
  std::span<const Column> col_idx() const noexcept { return col_idx_; }
  std::span<const float> values() const noexcept { return values_; }

  /// nnz·(4 + 2) + (rows + 1)·4
  std::size_t bytes() const noexcept;

  /// [rows×cols] expansion.
  Tensor to_dense() const;

  /// x has `cols` elements; returns `rows` elements.
  Tensor spmv(const Tensor& x) const;
  /// x is [cols×n]; returns [rows×n].
  Tensor spmm(const Tensor& x) const;

  /// y[rows×n] = A · x[cols×n], overwriting y.
  template <typename T>
  void multiply(const T* x, std::size_t n, T* y) const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Column> col_idx_;
  std::vector<float> values_;
};

/// Row-major float matrix with the same multiply contract, used as the dense
/// reference path in benchmarks.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(const Tensor& weights);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t bytes() const noexcept { return values_.size() * sizeof(float); }

  template <typename T>
  void multiply(const T* x, std::size_t n, T* y) const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<float> values_;
};

template <typename Matrix>
struct RuntimeLayer {
  LayerSpec spec;
  Matrix weight;
  std::vector<float> bias;
};

/// Scratch buffers reused across forward calls.
template <typename T>
struct Workspace {
  std::vector<T> a, b, columns;
};

/// Frozen sparse network. Dense layers are stored as CSR of the [out×in]
/// weight; conv kernels as CSR of the unrolled [C_out × C_in·kh·kw] matrix
/// and executed with im2col + spmm.
struct SparseModel {
  ModelSpec spec;
  Normalization norm;
  std::vector<RuntimeLayer<CsrMatrix>> layers;
  std::vector<double> rates;  // per-layer achieved sparsity from the masks

  /// Builds from a dense model and per-layer binary masks.
  static SparseModel build(const Model& model, std::span<const Tensor> masks);

  /// Logits [B×classes] for a normalized [B×1×28×28] batch, accumulated in
  /// double precision.
  Tensor forward(const Tensor& input) const;
  /// Single-precision inference path used for latency measurement.
  void forward_f32(std::span<const float> input, std::size_t batch, std::vector<float>& logits,
                   Workspace<float>& ws) const;

  /// Decompresses to a dense model holding M ⊙ W.
  Model to_dense() const;

  std::size_t weight_count() const;
  std::size_t nnz() const;
  /// Σ CSR bytes + 4 bytes per bias.
  std::size_t bytes() const;
  /// Σ r_l N_l / Σ N_l
  double achieved_rate() const;
};

/// Float dense runtime of a dense model, mirroring SparseModel::forward_f32.
struct DenseRuntime {
  ModelSpec spec;
  std::vector<RuntimeLayer<DenseMatrix>> layers;

  explicit DenseRuntime(const Model& model);
  void forward_f32(std::span<const float> input, std::size_t batch, std::vector<float>& logits,
                   Workspace<float>& ws) const;
  std::size_t bytes() const;
};

/// 4 bytes per weight and bias.
std::size_t dense_bytes(const Model& model);

/// Top-1 accuracy of the double-precision sparse runtime.
double evaluate(const SparseModel& model, const Dataset& data, std::size_t batch_size = 256);

// Container layout (little-endian):
//   magic "SPCLSPRS", u32 version, arch string (u32 length + bytes),
//   f64 norm mean, f64 norm stddev, u32 layer count, then per layer:
//   name string, u32 rows, u32 cols, u32 nnz, f64 rate,
//   (rows+1) × u32 row_ptr, nnz × u16 col_idx, nnz × f32 values,
//   u32 bias count, bias count × f32.
inline constexpr char kSparseMagic[8] = {'S', 'P', 'C', 'L', 'S', 'P', 'R', 'S'};
inline constexpr std::uint32_t kSparseVersion = 1;

std::vector<std::uint8_t> encode_sparse_model(const SparseModel& model);
SparseModel decode_sparse_model(std::span<const std::uint8_t> bytes);
void save_sparse_model(const SparseModel& model, const std::filesystem::path& path);
SparseModel load_sparse_model(const std::filesystem::path& path);
bool is_sparse_model_file(const std::filesystem::path& path);

struct BenchResult {
  double latency_sparse_ms = 0.0;
  double latency_dense_ms = 0.0;
  double speedup = 0.0;
  std::size_t bytes_sparse = 0;
  std::size_t bytes_dense = 0;
};

/// Median wall-clock milliseconds of `fn` over `repetitions` runs after
/// `warmup` untimed runs.
double median_latency_ms(const std::function<void()>& fn, std::size_t repetitions = 30, std::size_t warmup = 5);

/// Times the float sparse and dense runtimes on the same normalized batch.
BenchResult bench(const SparseModel& sparse, const Model& dense, const Tensor& batch, std::size_t repetitions = 30,
                  std::size_t warmup = 5);

}  // namespace sparsecal
