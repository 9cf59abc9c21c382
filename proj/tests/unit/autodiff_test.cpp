// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsecal/autodiff.hpp"
#include "sparsecal/error.hpp"
#include "support.hpp"

namespace sparsecal {
namespace {

using testing::max_grad_error;
using testing::random_positive;
using testing::random_tensor;

TEST(Tensor, RejectsInconsistentShapes) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 0}), DimensionError);
  EXPECT_EQ(Tensor::from({1, 2, 3}).shape(), Shape{3});
  EXPECT_THROW(Tensor::from({1, 2, 3}).reshaped({2, 2}), DimensionError);
}

TEST(Matmul, IdentityTimesColumn) {
  auto y = ad::matmul(ad::constant(Tensor::from({2, 2}, {1, 0, 0, 1})), ad::constant(Tensor::from({2, 1}, {3, 4})));
  EXPECT_EQ(y.value(), Tensor::from({2, 1}, {3, 4}));
}

TEST(Matmul, RowTimesColumn) {
  auto y = ad::matmul(ad::constant(Tensor::from({1, 2}, {1, 2})), ad::constant(Tensor::from({2, 1}, {3, 4})));
  EXPECT_DOUBLE_EQ(y.value().item(), 11.0);
}

TEST(Matmul, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(ad::matmul(ad::constant(Tensor({2, 3})), ad::constant(Tensor({2, 3}))), DimensionError);
}

TEST(Matmul, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(11);
  const auto a = random_tensor({3, 4}, rng);
  const auto b = random_tensor({4, 2}, rng);
  const auto c = random_tensor({3, 2}, rng);
  auto weighted = [&](const ad::Var& lhs, const ad::Var& rhs) {
    return ad::sum(ad::mul(ad::matmul(lhs, rhs), ad::constant(c)));
  };
  EXPECT_LE(max_grad_error([&](const ad::Var& x) { return weighted(x, ad::constant(b)); }, a, 1e-6), 1e-6);
  EXPECT_LE(max_grad_error([&](const ad::Var& x) { return weighted(ad::constant(a), x); }, b, 1e-6), 1e-6);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  const auto x = Tensor::from({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = ad::conv2d(ad::constant(x), ad::constant(Tensor({1, 1, 1, 1}, 1.0)), {}, {1, 0});
  EXPECT_EQ(y.value(), x);
}

TEST(Conv2d, OnesKernelSumsWindow) {
  auto y = ad::conv2d(ad::constant(Tensor({1, 2, 2}, 1.0)), ad::constant(Tensor({1, 1, 2, 2}, 1.0)), {}, {1, 0});
  EXPECT_EQ(y.value().shape(), (Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 4.0);
}

TEST(Conv2d, InvalidGeometryIsParameterError) {
  const auto x = ad::constant(Tensor({1, 3, 3}));
  EXPECT_THROW(ad::conv2d(x, ad::constant(Tensor({1, 1, 2, 2})), {}, {0, 0}), ParameterError);
  EXPECT_THROW(ad::conv2d(x, ad::constant(Tensor({1, 1, 4, 4})), {}, {1, 0}), ParameterError);
  EXPECT_NO_THROW(ad::conv2d(x, ad::constant(Tensor({1, 1, 4, 4})), {}, {1, 1}));
  EXPECT_THROW(ad::conv2d(x, ad::constant(Tensor({1, 2, 2, 2})), {}, {1, 0}), DimensionError);
}

TEST(Conv2d, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(12);
  const auto x = random_tensor({2, 2, 6, 5}, rng);
  const auto k = random_tensor({3, 2, 3, 3}, rng);
  const auto bias = random_tensor({3}, rng);
  const ad::Conv2dParams p{2, 1};
  const auto probe = random_tensor({2, 3, 3, 3}, rng);
  auto loss = [&](const ad::Var& xi, const ad::Var& ki, const ad::Var& bi) {
    return ad::sum(ad::mul(ad::conv2d(xi, ki, bi, p), ad::constant(probe)));
  };
  const auto cx = ad::constant(x), ck = ad::constant(k), cb = ad::constant(bias);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return loss(v, ck, cb); }, x, 1e-6), 1e-5);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return loss(cx, v, cb); }, k, 1e-6), 1e-5);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return loss(cx, ck, v); }, bias, 1e-6), 1e-5);
}

TEST(Elementwise, SoftmaxOfEqualLogitsIsUniform) {
  auto y = ad::softmax(ad::constant(Tensor::from({0, 0})));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.5);
}

TEST(Elementwise, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(13);
  auto y = ad::softmax(ad::constant(random_tensor({20, 7}, rng, 30.0)));
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += y.value()[r * 7 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Elementwise, ReluBlocksNegativeInput) {
  auto x = ad::parameter(Tensor::from({-2.0}));
  auto y = ad::relu(x);
  EXPECT_EQ(y.value().item(), 0.0);
  ad::backward(ad::sum(y));
  EXPECT_EQ(x.grad().item(), 0.0);
}

TEST(Elementwise, LogOfNonPositiveIsDomainError) {
  EXPECT_THROW(ad::log(ad::constant(Tensor::from({1.0, 0.0}))), DomainError);
  EXPECT_THROW(ad::log(ad::constant(Tensor::from({-1.0}))), DomainError);
}

TEST(Elementwise, SoftmaxGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(14);
  const auto x = random_tensor({5}, rng);
  const auto probe = random_tensor({5}, rng);
  auto loss = [&](const ad::Var& v) { return ad::sum(ad::mul(ad::softmax(v), ad::constant(probe))); };
  EXPECT_LE(max_grad_error(loss, x, 1e-6), 1e-6);
}

TEST(Elementwise, AllOpsMatchFiniteDifference) {
  std::mt19937_64 rng(15);
  const auto x = random_positive({3, 4}, rng);
  const auto other = random_tensor({3, 4}, rng);
  const auto row = random_tensor({4}, rng);
  const auto probe = random_tensor({3, 4}, rng);
  auto dot = [&](const ad::Var& v) { return ad::sum(ad::mul(v, ad::constant(probe))); };
  auto near_zero = [&](const ad::Var& v) { return ad::add(v, ad::constant(Tensor::scalar(-1.25))); };

  const std::vector<std::function<ad::Var(const ad::Var&)>> cases = {
      [&](const ad::Var& v) { return dot(ad::add(v, ad::constant(other))); },
      [&](const ad::Var& v) { return dot(ad::add(v, ad::constant(row))); },
      [&](const ad::Var& v) { return dot(ad::mul(v, ad::constant(other))); },
      [&](const ad::Var& v) { return dot(ad::mul(v, v)); },
      [&](const ad::Var& v) { return dot(ad::mul(v, ad::constant(Tensor::scalar(-3.0)))); },
      [&](const ad::Var& v) { return dot(ad::relu(near_zero(v))); },
      [&](const ad::Var& v) { return dot(ad::log(v)); },
      [&](const ad::Var& v) { return dot(ad::exp(v)); },
      [&](const ad::Var& v) { return dot(ad::abs(near_zero(v))); },
      [&](const ad::Var& v) { return dot(ad::softmax(v)); },
      [&](const ad::Var& v) { return ad::mean(ad::mul(v, v)); },
      [&](const ad::Var& v) { return ad::sum(ad::reshape(ad::mul(v, ad::constant(probe)), {12})); },
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    EXPECT_LE(max_grad_error(cases[i], x, 1e-6), 1e-4) << "case " << i;
  }
}

TEST(Elementwise, RowBroadcastGradientReachesBothOperands) {
  std::mt19937_64 rng(16);
  const auto m = random_tensor({3, 4}, rng);
  const auto row = random_tensor({4}, rng);
  const auto probe = random_tensor({3, 4}, rng);
  auto loss = [&](const ad::Var& a, const ad::Var& b) { return ad::sum(ad::mul(ad::mul(a, b), ad::constant(probe))); };
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return loss(ad::constant(m), v); }, row, 1e-6), 1e-6);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return loss(v, ad::constant(row)); }, m, 1e-6), 1e-6);
  EXPECT_THROW(ad::add(ad::constant(m), ad::constant(Tensor({3}))), DimensionError);
}

TEST(Backward, SumOfSquares) {
  auto w = ad::parameter(Tensor::from({1, 2, 3}));
  ad::backward(ad::sum(ad::mul(w, w)));
  EXPECT_EQ(w.grad(), Tensor::from({2, 4, 6}));
}

TEST(Backward, ConstantRootLeavesZeroGradients) {
  auto w = ad::parameter(Tensor::from({1, 2}));
  auto root = ad::sum(ad::mul(ad::constant(Tensor::from({0, 0})), ad::constant(Tensor::from({4, 5}))));
  ad::backward(root);
  ad::backward(ad::sum(ad::mul(w, ad::constant(Tensor({2})))));
  EXPECT_EQ(w.grad(), Tensor({2}));
}

TEST(Backward, NonScalarRootIsContractError) {
  EXPECT_THROW(ad::backward(ad::parameter(Tensor({2}))), ContractError);
}

TEST(Backward, TwoLayerMlpMatchesFiniteDifference) {
  std::mt19937_64 rng(17);
  const auto x = random_tensor({4, 5}, rng);
  Tensor w1 = random_tensor({6, 5}, rng, 0.5), b1 = random_tensor({6}, rng, 0.1);
  Tensor w2 = random_tensor({3, 6}, rng, 0.5), b2 = random_tensor({3}, rng, 0.1);
  auto net = [&](const ad::Var& a, const ad::Var& ab, const ad::Var& c, const ad::Var& cb) {
    auto h = ad::relu(ad::linear(ad::constant(x), a, ab));
    return ad::mean(ad::exp(ad::mul(ad::linear(h, c, cb), ad::constant(Tensor::scalar(0.3)))));
  };
  const auto c1 = ad::constant(w1), cb1 = ad::constant(b1), c2 = ad::constant(w2), cb2 = ad::constant(b2);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return net(v, cb1, c2, cb2); }, w1, 1e-5), 1e-4);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return net(c1, v, c2, cb2); }, b1, 1e-5), 1e-4);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return net(c1, cb1, v, cb2); }, w2, 1e-5), 1e-4);
  EXPECT_LE(max_grad_error([&](const ad::Var& v) { return net(c1, cb1, c2, v); }, b2, 1e-5), 1e-4);
}

TEST(Backward, ZeroGradThenBackwardIsRepeatable) {
  std::mt19937_64 rng(18);
  auto w = ad::parameter(random_tensor({4, 3}, rng));
  auto x = ad::constant(random_tensor({2, 3}, rng));
  auto loss = ad::sum(ad::softmax(ad::linear(x, w, {})));
  loss = ad::mean(ad::mul(loss, loss));
  ad::backward(loss);
  const Tensor first = w.grad();
  for (int i = 0; i < 3; ++i) {
    w.zero_grad();
    ad::backward(loss);
    EXPECT_EQ(w.grad(), first);
  }
  ad::backward(loss);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], 2 * first[i]);
}

TEST(Backward, EvaluationIsBitDeterministic) {
  auto build = [] {
    std::mt19937_64 rng(19);
    auto x = ad::constant(random_tensor({2, 1, 8, 8}, rng));
    auto k = ad::parameter(random_tensor({4, 1, 3, 3}, rng));
    auto y = ad::sum(ad::relu(ad::conv2d(x, k, {}, {1, 1})));
    ad::backward(y);
    return std::make_pair(y.value(), k.grad());
  };
  EXPECT_EQ(build(), build());
}

}  // namespace
}  // namespace sparsecal
