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

#include "eppnet/losses.h"

#include <cmath>
#include <cstring>

#include "eppnet/error.h"
#include "eppnet/model.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace eppnet {
namespace {

using testing::RandomTensor;
using testing::TinyConfig;

// The five same-class distances of the worked two-prototype example, laid
// out as one prototype row over five regions.
Tensor FigureDistances() {
  return Tensor({1, 5}, std::vector<double>{0.010, 0.020, 0.040, 0.018, 0.030});
}

double Mean(const std::vector<SelectedPair>& pairs) {
  double sum = 0.0;
  for (const SelectedPair& p : pairs) sum += p.distance;
  return sum / static_cast<double>(pairs.size());
}

TEST(MeanClusterLossTest, ThreeSmallestOfFigureExample) {
  const Tensor d = FigureDistances();
  const double loss = MeanClusterLoss({&d, 1}, 3, SelectionMode::kDistinctPairs);
  EXPECT_NEAR(loss, 0.016, 1e-15);
  EXPECT_EQ(loss, (0.010 + 0.018 + 0.020) / 3.0);
}

TEST(MeanClusterLossTest, AllFiveOfFigureExample) {
  const Tensor d = FigureDistances();
  EXPECT_NEAR(MeanClusterLoss({&d, 1}, 5, SelectionMode::kDistinctPairs), 0.0236, 1e-15);
}

TEST(MeanClusterLossTest, ThetaOneEqualsClusterCostInBothModes) {
  const Tensor d = FigureDistances();
  const double baseline = ClusterLoss({&d, 1});
  EXPECT_EQ(baseline, 0.010);
  EXPECT_EQ(MeanClusterLoss({&d, 1}, 1, SelectionMode::kDistinctPairs), baseline);
  EXPECT_EQ(MeanClusterLoss({&d, 1}, 1, SelectionMode::kDistinctRegions), baseline);
}

TEST(MeanClusterLossTest, ThetaOneBitwiseOnRandomInputs) {
  Rng rng(1);
  std::vector<Tensor> images;
  for (int i = 0; i < 7; ++i) images.push_back(RandomTensor(rng, {3, 9}, 0.0, 2.0));
  const double baseline = ClusterLoss(images);
  for (SelectionMode mode : {SelectionMode::kDistinctPairs, SelectionMode::kDistinctRegions}) {
    const double mean = MeanClusterLoss(images, 1, mode);
    EXPECT_EQ(std::memcmp(&mean, &baseline, sizeof(double)), 0);
  }
}

TEST(MeanClusterLossTest, NondecreasingInThetaAndBounded) {
  Rng rng(2);
  const Tensor d = RandomTensor(rng, {4, 6}, 0.0, 3.0);
  double previous = -1.0;
  double all = 0.0;
  for (double v : d.data()) all += v;
  all /= static_cast<double>(d.size());
  const double min = ClusterLoss({&d, 1});
  for (std::size_t theta = 1; theta <= d.size(); ++theta) {
    const double loss = MeanClusterLoss({&d, 1}, theta, SelectionMode::kDistinctPairs);
    EXPECT_GE(loss, previous);
    EXPECT_GE(loss, min);
    EXPECT_LE(loss, all + 1e-15);
    previous = loss;
  }
}

TEST(SelectClusterPairsTest, DistinctPairsMayReuseARegion) {
  // Rows are prototypes, columns regions.
  const Tensor d({2, 2}, std::vector<double>{0.1, 0.5, 0.2, 0.9});
  const auto pairs = SelectClusterPairs(d, 2, SelectionMode::kDistinctPairs);
  EXPECT_EQ(pairs[0], (SelectedPair{0, 0, 0.1}));
  EXPECT_EQ(pairs[1], (SelectedPair{1, 0, 0.2}));
  EXPECT_DOUBLE_EQ(Mean(pairs), 0.15);
}

TEST(SelectClusterPairsTest, DistinctRegionsRemovesUsedRegion) {
  const Tensor d({2, 2}, std::vector<double>{0.1, 0.5, 0.2, 0.9});
  const auto pairs = SelectClusterPairs(d, 2, SelectionMode::kDistinctRegions);
  EXPECT_EQ(pairs[0], (SelectedPair{0, 0, 0.1}));
  EXPECT_EQ(pairs[1], (SelectedPair{0, 1, 0.5}));
}

TEST(SelectClusterPairsTest, TiesBrokenByRegionThenPrototype) {
  const Tensor d({2, 3}, 0.25);
  const auto pairs = SelectClusterPairs(d, 3, SelectionMode::kDistinctPairs);
  EXPECT_EQ(pairs[0], (SelectedPair{0, 0, 0.25}));
  EXPECT_EQ(pairs[1], (SelectedPair{1, 0, 0.25}));
  EXPECT_EQ(pairs[2], (SelectedPair{0, 1, 0.25}));
  EXPECT_EQ(SelectMinimumPair(d), (SelectedPair{0, 0, 0.25}));
}

TEST(SelectClusterPairsTest, ThetaBoundsPerMode) {
  const Tensor d({2, 3}, 1.0);
  EXPECT_NO_THROW(SelectClusterPairs(d, 6, SelectionMode::kDistinctPairs));
  EXPECT_THROW(SelectClusterPairs(d, 7, SelectionMode::kDistinctPairs), Error);
  EXPECT_NO_THROW(SelectClusterPairs(d, 3, SelectionMode::kDistinctRegions));
  EXPECT_THROW(SelectClusterPairs(d, 4, SelectionMode::kDistinctRegions), Error);
  EXPECT_THROW(SelectClusterPairs(d, 0, SelectionMode::kDistinctPairs), Error);
}

TEST(ClusterLossTest, SingleZeroPair) {
  const Tensor d({1, 1}, 0.0);
  EXPECT_EQ(ClusterLoss({&d, 1}), 0.0);
}

TEST(ClusterLossTest, NoSameClassPrototypesRejected) {
  const Tensor d({0, 4});
  EXPECT_THROW(ClusterLoss({&d, 1}), Error);
}

TEST(CrossEntropyTest, Values) {
  EXPECT_EQ(CrossEntropy(Tensor({1, 2}, std::vector<double>{0.0, 1.0}),
                         std::vector<std::size_t>{1}),
            0.0);
  for (std::size_t label : {0u, 1u}) {
    EXPECT_NEAR(CrossEntropy(Tensor({1, 2}, 0.5), std::vector<std::size_t>{label}),
                0.693147, 1e-6);
  }
  const Tensor two({2, 2}, std::vector<double>{0.5, 0.5, 0.0, 1.0});
  EXPECT_NEAR(CrossEntropy(two, std::vector<std::size_t>{0, 1}), std::log(2.0) / 2.0,
              1e-15);
}

TEST(CrossEntropyTest, ClampedAtFloor) {
  EXPECT_NEAR(CrossEntropy(Tensor({1, 2}, std::vector<double>{1.0, 0.0}),
                           std::vector<std::size_t>{1}),
              -std::log(1e-12), 1e-9);
}

TEST(CrossEntropyTest, InvalidInputsRejected) {
  EXPECT_THROW(CrossEntropy(Tensor({1, 2}, 0.5), std::vector<std::size_t>{2}), Error);
  EXPECT_THROW(CrossEntropy(Tensor({1, 2}, 0.4), std::vector<std::size_t>{0}), Error);
}

TEST(SeparationCostTest, Values) {
  const Tensor one({1, 2}, std::vector<double>{0.5, 0.2});
  EXPECT_EQ(SeparationCost({&one, 1}), -0.2);
  const Tensor zeros({2, 2}, 0.0);
  EXPECT_EQ(SeparationCost({&zeros, 1}), 0.0);
  const std::vector<Tensor> two = {Tensor({1, 1}, 0.2), Tensor({1, 1}, 0.4)};
  EXPECT_NEAR(SeparationCost(two), -0.3, 1e-15);
}

TEST(SeparationCostTest, NoWrongClassRejected) {
  const Tensor none({0, 3});
  EXPECT_THROW(SeparationCost({&none, 1}), Error);
}

TEST(ComposeTotalTest, LiteralSignExample) {
  EXPECT_NEAR(ComposeTotal(0.7, 0.016, -0.2, 0.8, -0.8), 0.8728, 1e-12);
  EXPECT_EQ(ComposeTotal(0.7, 0.016, -0.2, 0.0, 0.0), 0.7);
  EXPECT_EQ(ComposeTotal(0.0, 0.0, 0.0, 0.8, 0.8), 0.0);
  EXPECT_EQ(ComposeTotal(0.0, 0.0, -0.0, 0.8, -0.8), 0.0);
}

class TotalLossTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = TinyConfig();
    params_ = InitializeParams(config_.model, 4);
    Rng rng(5);
    for (int i = 0; i < 4; ++i) {
      images_.push_back(RandomTensor(rng, {12, 12, 3}, 0.0, 1.0));
      labels_.push_back(i % 2);
    }
  }
  TrainConfig config_;
  ModelParams params_;
  std::vector<Tensor> images_;
  std::vector<std::size_t> labels_;
};

TEST_F(TotalLossTest, RecomposesFromParts) {
  const LossBreakdown b = TotalLoss(images_, labels_, params_, config_);
  EXPECT_NEAR(b.total, b.ce + config_.lambda1 * b.cluster + config_.lambda2 * b.separation,
              1e-12);
  ASSERT_EQ(b.selections.size(), images_.size());
  for (const auto& s : b.selections) EXPECT_EQ(s.size(), config_.theta);
}

TEST_F(TotalLossTest, ZeroWeightsLeaveCrossEntropy) {
  config_.lambda1 = 0.0;
  config_.lambda2 = 0.0;
  const LossBreakdown b = TotalLoss(images_, labels_, params_, config_);
  EXPECT_EQ(b.total, b.ce);
}

TEST_F(TotalLossTest, GraphAgreesWithValueLevelLoss) {
  const LossBreakdown b = TotalLoss(images_, labels_, params_, config_);
  double ce = 0.0, cluster = 0.0, sep = 0.0;
  for (std::size_t i = 0; i < images_.size(); ++i) {
    Graph g;
    const auto vars = BindParams(g, params_, {});
    const ForwardVars fwd = BuildForward(g, vars, params_, images_[i]);
    const ImageLossVars loss = BuildImageLoss(g, fwd, params_, labels_[i], config_);
    ce += g.value(loss.ce)[0];
    cluster += g.value(loss.cluster)[0];
    sep += g.value(loss.separation)[0];
    EXPECT_EQ(loss.selection, b.selections[i]);
  }
  const double n = static_cast<double>(images_.size());
  EXPECT_NEAR(ce / n, b.ce, 1e-12);
  EXPECT_NEAR(cluster / n, b.cluster, 1e-12);
  EXPECT_NEAR(sep / n, b.separation, 1e-12);
}

TEST_F(TotalLossTest, BaselineObjectiveMatchesThetaOne) {
  TrainConfig baseline = config_;
  baseline.objective = ClusterObjective::kMinBaseline;
  TrainConfig theta_one = config_;
  theta_one.theta = 1;
  const LossBreakdown a = TotalLoss(images_, labels_, params_, baseline);
  const LossBreakdown b = TotalLoss(images_, labels_, params_, theta_one);
  EXPECT_EQ(a.cluster, b.cluster);
  EXPECT_EQ(a.total, b.total);
}

TEST_F(TotalLossTest, ClusterGradientSpreadsEvenlyOverSelectedPairs) {
  config_.lambda2 = 0.0;
  Graph g;
  const auto vars = BindParams(g, params_, {true, true, false});
  const ForwardVars fwd = BuildForward(g, vars, params_, images_[0]);
  const ImageLossVars loss = BuildImageLoss(g, fwd, params_, labels_[0], config_);
  g.Backward(loss.cluster);
  const Tensor& grad = g.grad(fwd.distances);
  const std::size_t cells = grad.dim(1) * grad.dim(2);
  double total = 0.0;
  for (const SelectedPair& p : loss.selection) {
    EXPECT_DOUBLE_EQ(grad[p.prototype * cells + p.region], 1.0 / config_.theta);
  }
  for (double v : grad.data()) total += v;
  EXPECT_DOUBLE_EQ(total, 1.0);
}

}  // namespace
}  // namespace eppnet
