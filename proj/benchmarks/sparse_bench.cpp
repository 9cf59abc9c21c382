// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sparsecal/kde.hpp"
#include "sparsecal/masking.hpp"
#include "sparsecal/sparse.hpp"
#include "sparsecal/train.hpp"

namespace {

using sparsecal::CsrMatrix;
using sparsecal::DenseMatrix;
using sparsecal::Tensor;

Tensor gaussian(sparsecal::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(g(rng));
  return t;
}

std::vector<float> activations(std::size_t n, std::uint64_t seed) {
  const auto t = gaussian({n}, seed);
  return {t.data().begin(), t.data().end()};
}

// state.range(0): sparsity in percent, state.range(1): batch columns.
void BM_CsrMultiply(benchmark::State& state) {
  const double rate = static_cast<double>(state.range(0)) / 100.0;
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto w = gaussian({256, 784}, 1);
  const auto csr = CsrMatrix::from_dense(w, sparsecal::gen_mask(w, sparsecal::magnitude_quantile(w.data(), rate)));
  const auto x = activations(784 * n, 2);
  std::vector<float> y(256 * n);
  for (auto _ : state) {
    csr.multiply(x.data(), n, y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["nnz"] = static_cast<double>(csr.nnz());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * csr.nnz() * n));
}
BENCHMARK(BM_CsrMultiply)->ArgsProduct({{50, 70, 90}, {1, 32, 128}});

void BM_DenseMultiply(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix dense(gaussian({256, 784}, 1));
  const auto x = activations(784 * n, 2);
  std::vector<float> y(256 * n);
  for (auto _ : state) {
    dense.multiply(x.data(), n, y.data());
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DenseMultiply)->Arg(1)->Arg(32)->Arg(128);

struct Models {
  sparsecal::Model dense;
  sparsecal::SparseModel sparse;
};

Models build_models(sparsecal::Arch arch, double rate) {
  auto m = sparsecal::Model::initialize(sparsecal::ModelSpec::make(arch), 3);
  sparsecal::round_to_float(m);
  std::vector<Tensor> masks;
  for (const auto& w : m.weights) masks.push_back(sparsecal::gen_mask(w, sparsecal::magnitude_quantile(w.data(), rate)));
  auto sparse = sparsecal::SparseModel::build(m, masks);
  return {std::move(m), std::move(sparse)};
}

void BM_SparseForward(benchmark::State& state) {
  const auto arch = state.range(0) == 0 ? sparsecal::Arch::mlp_3x256 : sparsecal::Arch::cnn_2conv_2fc;
  const auto models = build_models(arch, static_cast<double>(state.range(1)) / 100.0);
  const std::size_t batch = 32;
  const auto x = activations(batch * 784, 4);
  std::vector<float> logits;
  sparsecal::Workspace<float> ws;
  for (auto _ : state) {
    models.sparse.forward_f32(x, batch, logits, ws);
    benchmark::DoNotOptimize(logits.data());
  }
  state.counters["bytes"] = static_cast<double>(models.sparse.bytes());
}
BENCHMARK(BM_SparseForward)->ArgsProduct({{0, 1}, {50, 70, 90}})->Unit(benchmark::kMicrosecond);

void BM_DenseForward(benchmark::State& state) {
  const auto arch = state.range(0) == 0 ? sparsecal::Arch::mlp_3x256 : sparsecal::Arch::cnn_2conv_2fc;
  const sparsecal::DenseRuntime runtime(build_models(arch, 0.0).dense);
  const std::size_t batch = 32;
  const auto x = activations(batch * 784, 4);
  std::vector<float> logits;
  sparsecal::Workspace<float> ws;
  for (auto _ : state) {
    runtime.forward_f32(x, batch, logits, ws);
    benchmark::DoNotOptimize(logits.data());
  }
  state.counters["bytes"] = static_cast<double>(runtime.bytes());
}
BENCHMARK(BM_DenseForward)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_KdeBridge(benchmark::State& state) {
  const auto w = gaussian({200704}, 5);
  const auto kde = sparsecal::fit_kde(w.data(), {}, 6);
  double t = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kde.rate(t));
    benchmark::DoNotOptimize(kde.rate_derivative(t));
    t = t < 2.0 ? t + 1e-3 : 0.1;
  }
}
BENCHMARK(BM_KdeBridge);

}  // namespace

BENCHMARK_MAIN();
