// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "sparsecal/autodiff.hpp"
#include "sparsecal/tensor.hpp"

namespace sparsecal::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = gauss(rng);
  return t;
}

inline Tensor random_positive(Shape shape, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> pick(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = pick(rng);
  return t;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

/// Largest relative error between the autodiff gradient of `loss` with respect
/// to `leaf` and a central finite difference of step `eps`.
inline double max_grad_error(const std::function<ad::Var(const ad::Var&)>& loss, const Tensor& at, double eps,
                             double floor = 1e-6) {
  auto leaf = ad::parameter(at);
  ad::backward(loss(leaf));
  const Tensor analytic = leaf.grad();
  double worst = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    Tensor plus = at, minus = at;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd = (loss(ad::constant(plus)).value().item() - loss(ad::constant(minus)).value().item()) / (2 * eps);
    worst = std::max(worst, rel_err(analytic[i], fd, floor));
  }
  return worst;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sparsecal_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sparsecal::testing
