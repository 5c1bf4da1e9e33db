/*
 * Copyright 2026 The EPPNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "eppnet/ops.h"

#include <cmath>

#include "eppnet/error.h"
#include "eppnet/grad_check.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace eppnet {
namespace {

using testing::RandomTensor;

// Direct summation over the window, used as the convolution oracle.
Tensor NaiveConv(const Tensor& in, const Tensor& k, std::size_t stride,
                 std::size_t pad) {
  const std::size_t h = in.dim(0), w = in.dim(1), c = in.dim(2);
  const std::size_t ks = k.dim(0), f = k.dim(3);
  const std::size_t oh = (h + 2 * pad - ks) / stride + 1;
  const std::size_t ow = (w + 2 * pad - ks) / stride + 1;
  Tensor out({oh, ow, f});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t o = 0; o < f; ++o) {
        double sum = 0.0;
        for (std::size_t dy = 0; dy < ks; ++dy)
          for (std::size_t dx = 0; dx < ks; ++dx)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const long iy = static_cast<long>(y * stride + dy) - static_cast<long>(pad);
              const long ix = static_cast<long>(x * stride + dx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) ||
                  ix >= static_cast<long>(w))
                continue;
              sum += in.at({static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ch}) *
                     k.at({dy, dx, ch, o});
            }
        out.at({y, x, o}) = sum;
      }
  return out;
}

TEST(Conv2DTest, ScalarProduct) {
  const Tensor out = Conv2D(Tensor({1, 1, 1}, 2.0), Tensor({1, 1, 1, 1}, 3.0),
                            nullptr, {});
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(out[0], 6.0);
}

TEST(Conv2DTest, WindowSum) {
  const Tensor in({2, 2, 1}, std::vector<double>{1, 2, 3, 4});
  const Tensor out = Conv2D(in, Tensor({2, 2, 1, 1}, 1.0), nullptr, {});
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(out[0], 10.0);
}

TEST(Conv2DTest, MatchesNaiveOracle) {
  Rng rng(11);
  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 0}, {2, 0}, {1, 1}, {2, 1}}) {
    const Tensor in = RandomTensor(rng, {7, 6, 3});
    const Tensor k = RandomTensor(rng, {3, 3, 3, 4});
    const Tensor out = Conv2D(in, k, nullptr, {stride, pad});
    const Tensor expected = NaiveConv(in, k, stride, pad);
    ASSERT_EQ(out.shape(), expected.shape());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expected[i], 1e-12);
  }
}

TEST(Conv2DTest, ValidOutputExtent) {
  const Tensor out = Conv2D(Tensor({9, 8, 1}), Tensor({3, 3, 1, 2}), nullptr, {2, 0});
  EXPECT_EQ(out.shape(), (Shape{4, 3, 2}));  // floor((H - k) / s) + 1
}

TEST(Conv2DTest, BiasAddsPerFilter) {
  Tensor bias({2}, std::vector<double>{0.5, -1.0});
  const Tensor out = Conv2D(Tensor({2, 2, 1}, 1.0), Tensor({1, 1, 1, 2}, 2.0), &bias, {});
  EXPECT_EQ(out.at({1, 1, 0}), 2.5);
  EXPECT_EQ(out.at({1, 1, 1}), 1.0);
}

TEST(Conv2DTest, ChannelMismatchNamesBothShapes) {
  try {
    Conv2D(Tensor({4, 4, 2}), Tensor({3, 3, 3, 1}), nullptr, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
    const std::string what = e.what();
    EXPECT_NE(what.find("[4x4x2]"), std::string::npos);
    EXPECT_NE(what.find("[3x3x3x1]"), std::string::npos);
  }
}

TEST(Conv2DTest, KernelLargerThanInputRejected) {
  EXPECT_THROW(Conv2D(Tensor({2, 2, 1}), Tensor({3, 3, 1, 1}), nullptr, {}), Error);
}

TEST(Conv2DTest, WeightGradientMatchesFiniteDifferences) {
  Rng rng(3);
  const Tensor in = RandomTensor(rng, {5, 5, 2});
  const Tensor weights = RandomTensor(rng, {3, 3, 4});
  auto f = [&](const Tensor& k, Tensor* grad) {
    const Tensor out = Conv2D(in, k, nullptr, {});
    double value = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) value += weights[i] * out[i];
    if (grad != nullptr) {
      *grad = Tensor(k.shape());
      Conv2DBackward(in, k, weights, {}, nullptr, grad, nullptr);
    }
    return value;
  };
  EXPECT_LE(GradCheck(f, RandomTensor(rng, {3, 3, 2, 4})), 1e-4);
}

TEST(ActivationTest, ReluAndSigmoidValues) {
  const Tensor x({3}, std::vector<double>{-1.0, 0.0, 2.0});
  const Tensor r = Activation(x, ActivationKind::kRelu);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[2], 2.0);
  const Tensor s = Activation(x, ActivationKind::kSigmoid);
  EXPECT_EQ(s[1], 0.5);
}

TEST(ActivationTest, SigmoidStrictlyInsideUnitInterval) {
  const Tensor s = Activation(Tensor({2}, std::vector<double>{-30.0, 30.0}),
                              ActivationKind::kSigmoid);
  EXPECT_GT(s[0], 0.0);
  EXPECT_LT(s[1], 1.0);
  EXPECT_TRUE(s.AllFinite());
}

TEST(ActivationTest, SigmoidDerivativeAtZero) {
  const Tensor out = Activation(Tensor({1}), ActivationKind::kSigmoid);
  Tensor gin({1});
  ActivationBackward(out, Tensor({1}, 1.0), ActivationKind::kSigmoid, &gin);
  EXPECT_EQ(gin[0], 0.25);
  auto f = [](const Tensor& x, Tensor* grad) {
    const Tensor y = Activation(x, ActivationKind::kSigmoid);
    if (grad != nullptr) {
      *grad = Tensor(x.shape());
      ActivationBackward(y, Tensor({1}, 1.0), ActivationKind::kSigmoid, grad);
    }
    return y[0];
  };
  EXPECT_LE(GradCheck(f, Tensor({1})), 1e-6);
}

TEST(SoftmaxTest, KnownValues) {
  const std::vector<double> a = Softmax(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(a[0], 0.5);
  EXPECT_EQ(a[1], 0.5);
  const std::vector<double> b = Softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  EXPECT_NEAR(b[0], 0.25, 1e-12);
  EXPECT_NEAR(b[1], 0.75, 1e-12);
}

TEST(SoftmaxTest, ShiftInvariantAndNormalised) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.Uniform(-5.0, 5.0);
    const double c = rng.Uniform(-100.0, 100.0);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    const auto p = Softmax(v);
    const auto q = Softmax(shifted);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(p[i], q[i], 1e-12);
      sum += p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SoftmaxTest, LargeLogitsStayFinite) {
  const auto p = Softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(p[0], 1.0);
  EXPECT_TRUE(std::isfinite(p[1]));
}

TEST(GlobalMaxPoolTest, ValueAndPosition) {
  const MaxPosition m = GlobalMaxPool(Tensor({2, 2}, std::vector<double>{1, 3, 2, 0}));
  EXPECT_EQ(m.value, 3.0);
  EXPECT_EQ(m.row, 0u);
  EXPECT_EQ(m.col, 1u);
}

TEST(GlobalMaxPoolTest, TiesGoToFirstRowMajorIndex) {
  const MaxPosition m = GlobalMaxPool(Tensor({3, 3}, 5.0));
  EXPECT_EQ(m.value, 5.0);
  EXPECT_EQ(m.row, 0u);
  EXPECT_EQ(m.col, 0u);
}

TEST(GlobalMaxPoolTest, EmptyMapRejected) {
  try {
    GlobalMaxPool(Tensor({0, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(MaxPool2DTest, PicksWindowMaxima) {
  const Tensor in({2, 4, 1}, std::vector<double>{1, 5, 2, 0, 3, 4, 8, 1});
  std::vector<std::size_t> argmax;
  const Tensor out = MaxPool2D(in, 2, &argmax);
  ASSERT_EQ(out.shape(), (Shape{1, 2, 1}));
  EXPECT_EQ(out[0], 5.0);
  EXPECT_EQ(out[1], 8.0);
  EXPECT_EQ(argmax[0], 1u);
  EXPECT_EQ(argmax[1], 6u);
}

TEST(SquaredDistancesTest, Arithmetic) {
  const Tensor features({1, 1, 2}, std::vector<double>{0.2, 0.4});
  const Tensor protos({2, 2}, std::vector<double>{0.1, 0.2, 0.0, 0.0});
  const Tensor d = SquaredDistances(features, protos);
  ASSERT_EQ(d.shape(), (Shape{2, 1, 1}));
  EXPECT_NEAR(d[0], 0.05, 1e-15);
  EXPECT_NEAR(d[1], 0.2 * 0.2 + 0.4 * 0.4, 1e-15);  // zero prototype: squared norm
}

TEST(LogSimilarityTest, DerivativeMatchesFiniteDifference) {
  for (double d : {0.0, 0.3, 2.0}) {
    const double h = 1e-7;
    const double fd = (LogSimilarity(d + h, 1e-4) - LogSimilarity(std::max(0.0, d - h), 1e-4)) /
                      (d + h - std::max(0.0, d - h));
    EXPECT_NEAR(LogSimilarityDerivative(d, 1e-4), fd, 1e-3 * std::abs(fd));
  }
}

}  // namespace
}  // namespace eppnet
