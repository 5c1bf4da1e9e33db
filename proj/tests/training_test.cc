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

#include "eppnet/training.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eppnet/checkpoint.h"
#include "eppnet/error.h"
#include "eppnet/reports.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace eppnet {
namespace {

using testing::TempDir;
using testing::TinyConfig;
using testing::TinySpec;

struct Fixture {
  Dataset data = Generate(TinySpec());
  TrainConfig config = [] {
    TrainConfig c = TinyConfig();
    c.model.input_height = 12;
    c.model.input_width = 12;
    return c;
  }();
  ModelParams params = InitializeParams(config.model, 3);
};

bool SameFeaturePath(const ModelParams& a, const ModelParams& b) {
  const auto ra = ParamRefs(a);
  const auto rb = ParamRefs(b);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].group == ParamGroup::kClassifier) continue;
    if (!ra[i].tensor->BitwiseEquals(*rb[i].tensor)) return false;
  }
  return true;
}

double FullBatchCe(const ModelParams& params, const std::vector<ImageSummary>& s,
                   const Split& split) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto logits = Logits(s[i].scores, params.fc_weights, params.prune_mask);
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    sum += -(logits[split.labels[i]] - mx - std::log(z));
  }
  return sum / static_cast<double>(s.size());
}

TEST(SgdMomentumTest, PlainStepAndVelocity) {
  Tensor w = Tensor::Vector({1.0, 2.0});
  Tensor* target = &w;
  SgdMomentum opt(0.1, 0.5);
  const Tensor g = Tensor::Vector({1.0, -1.0});
  opt.Step(std::span<Tensor* const>(&target, 1), std::span<const Tensor>(&g, 1));
  EXPECT_DOUBLE_EQ(w[0], 0.9);
  EXPECT_DOUBLE_EQ(w[1], 2.1);
  opt.Step(std::span<Tensor* const>(&target, 1), std::span<const Tensor>(&g, 1));
  EXPECT_DOUBLE_EQ(w[0], 0.9 - 0.1 * 1.5);
}

TEST(SgdMomentumTest, ClipsGlobalNorm) {
  Tensor w = Tensor::Vector({0.0, 0.0});
  Tensor* target = &w;
  SgdMomentum opt(1.0, 0.0, 1.0);
  const Tensor g = Tensor::Vector({3.0, 4.0});
  opt.Step(std::span<Tensor* const>(&target, 1), std::span<const Tensor>(&g, 1));
  EXPECT_DOUBLE_EQ(w[0], -0.6);
  EXPECT_DOUBLE_EQ(w[1], -0.8);
}

TEST(EpochOrderTest, PermutationThatChangesWithEpoch) {
  const auto a = EpochOrder(20, 5, 1);
  const auto b = EpochOrder(20, 5, 2);
  EXPECT_EQ(a, EpochOrder(20, 5, 1));
  EXPECT_NE(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Stage1Test, ClassifierBitwiseFrozen) {
  Fixture f;
  ModelParams params = f.params;
  SgdMomentum opt(f.config.stage1_learning_rate, f.config.momentum);
  Stage1Epoch(params, f.data.train, f.config, 1, opt);
  EXPECT_TRUE(params.fc_weights.BitwiseEquals(f.params.fc_weights));
  EXPECT_FALSE(SameFeaturePath(params, f.params));
}

TEST(Stage1Test, Deterministic) {
  Fixture f;
  ModelParams a = f.params;
  ModelParams b = f.params;
  SgdMomentum oa(0.01, 0.9);
  SgdMomentum ob(0.01, 0.9);
  const LossBreakdown la = Stage1Epoch(a, f.data.train, f.config, 1, oa);
  const LossBreakdown lb = Stage1Epoch(b, f.data.train, f.config, 1, ob);
  EXPECT_TRUE(a.BitwiseEquals(b));
  EXPECT_EQ(la.total, lb.total);
}

TEST(Stage1Test, ZeroWeightsGiveCrossEntropyOnly) {
  Fixture f;
  f.config.lambda1 = 0.0;
  f.config.lambda2 = 0.0;
  ModelParams params = f.params;
  SgdMomentum opt(0.01, 0.9);
  const LossBreakdown loss = Stage1Epoch(params, f.data.train, f.config, 1, opt);
  EXPECT_EQ(loss.total, loss.ce);
}

TEST(Stage1Test, NonFiniteLossNamesBatch) {
  Fixture f;
  ModelParams params = f.params;
  params.fc_weights[0] = std::numeric_limits<double>::infinity();
  SgdMomentum opt(0.01, 0.9);
  try {
    Stage1Epoch(params, f.data.train, f.config, 1, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFinite);
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos) << e.what();
  }
}

TEST(Stage2Test, ProjectedPrototypesSitOnOwnClassRegions) {
  Fixture f;
  ModelParams params = f.params;
  const auto sources = Stage2Project(params, f.data.train);
  EXPECT_EQ(sources.size(), params.num_prototypes());
  for (const ProjectionSource& src : sources) {
    const std::size_t j = src.prototype;
    EXPECT_EQ(f.data.train.labels[src.image_index], params.proto_class[j]);
    const Tensor grid =
        DistanceGrid(ExtractFeatures(f.data.train.images[src.image_index], params), params);
    EXPECT_EQ(grid.at({j, src.location.row, src.location.col}), 0.0);
  }
}

TEST(Stage3Test, OnlyClassifierChanges) {
  Fixture f;
  ModelParams params = f.params;
  SgdMomentum opt(f.config.stage3_learning_rate, f.config.momentum);
  Stage3Epoch(params, f.data.train, f.config, 1, opt);
  EXPECT_TRUE(SameFeaturePath(params, f.params));
  EXPECT_FALSE(params.fc_weights.BitwiseEquals(f.params.fc_weights));
}

TEST(Stage3Test, Deterministic) {
  Fixture f;
  ModelParams a = f.params;
  ModelParams b = f.params;
  SgdMomentum oa(0.05, 0.9);
  SgdMomentum ob(0.05, 0.9);
  Stage3Epoch(a, f.data.train, f.config, 4, oa);
  Stage3Epoch(b, f.data.train, f.config, 4, ob);
  EXPECT_TRUE(a.fc_weights.BitwiseEquals(b.fc_weights));
}

// Two prototypes per class; images of class k score 1 on their own
// prototypes and 0 elsewhere. Full-batch gradient descent on this convex,
// separable problem with a small step must not increase the cross-entropy.
TEST(Stage3Test, CrossEntropyNonincreasingOnSeparableScores) {
  Fixture f;
  f.config.batch_size = f.data.train.size();
  std::vector<ImageSummary> summaries(f.data.train.size());
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    summaries[i].scores.assign(4, 0.0);
    const std::size_t k = f.data.train.labels[i];
    summaries[i].scores[2 * k] = 1.0;
    summaries[i].scores[2 * k + 1] = 1.0;
  }
  ModelParams params = f.params;
  SgdMomentum opt(0.05, 0.0);
  double previous = FullBatchCe(params, summaries, f.data.train);
  for (std::size_t epoch = 1; epoch <= 20; ++epoch) {
    Stage3Epoch(params, f.data.train, f.config, epoch, opt, &summaries);
    const double ce = FullBatchCe(params, summaries, f.data.train);
    EXPECT_LE(ce, previous) << "epoch " << epoch;
    previous = ce;
  }
}

TEST(TrainTest, ScheduleRespectsCap) {
  Fixture f;
  f.config.epoch_cap = 7;
  const TrainResult r = Train(f.config, f.data);
  ASSERT_EQ(r.log.epochs.size(), 7u);
  const Stage s1 = Stage::kStage1;
  const Stage s3 = Stage::kStage3;
  const std::vector<Stage> expected = {s1, s1, s3, s1, s1, s3, s1};
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(r.log.epochs[i].epoch, i + 1);
    EXPECT_EQ(r.log.epochs[i].stage, expected[i]);
  }
  ASSERT_EQ(r.log.projections.size(), 3u);
  EXPECT_EQ(r.log.projections[0].after_epoch, 2u);
  EXPECT_EQ(r.log.projections[2].after_epoch, 7u);
}

TEST(TrainTest, IdenticalRunsAreBitwiseEqual) {
  Fixture f;
  const TrainResult a = Train(f.config, f.data);
  const TrainResult b = Train(f.config, f.data);
  EXPECT_TRUE(a.params.BitwiseEquals(b.params));
  EXPECT_TRUE(a.log.EqualsIgnoringWallTime(b.log));
  EXPECT_EQ(SerializeCheckpoint(a.params, a.config),
            SerializeCheckpoint(b.params, b.config));
}

TEST(TrainTest, ThetaOneMatchesBaselineCost) {
  Fixture f;
  f.config.theta = 1;
  TrainConfig baseline = f.config;
  baseline.objective = ClusterObjective::kMinBaseline;
  const TrainResult a = Train(f.config, f.data);
  const TrainResult b = Train(baseline, f.data);
  EXPECT_TRUE(a.log.EqualsIgnoringWallTime(b.log));
  EXPECT_TRUE(a.params.BitwiseEquals(b.params));
}

TEST(TrainTest, CheckpointPerCycle) {
  Fixture f;
  TempDir dir;
  TrainOptions options;
  options.checkpoint_dir = dir.path().string();
  const TrainResult r = Train(f.config, f.data, options);
  EXPECT_TRUE(std::filesystem::exists(dir.File("cycle_1.eppn")));
  EXPECT_TRUE(std::filesystem::exists(dir.File("cycle_2.eppn")));
  EXPECT_FALSE(std::filesystem::exists(dir.File("cycle_3.eppn")));
  EXPECT_TRUE(LoadCheckpoint(dir.File("cycle_2.eppn")).params.BitwiseEquals(r.params));
}

TEST(TrainTest, PartialLogPersistedOnAbort) {
  Fixture f;
  TempDir dir;
  TrainOptions options;
  options.log_path = dir.File("log.csv");
  options.on_epoch = [](const EpochRecord& record) {
    if (record.epoch == 4) throw Error(ErrorCode::kNotFinite, "injected");
  };
  EXPECT_THROW(Train(f.config, f.data, options), Error);
  const TrainLog log = ReadTrainLogCsv(dir.File("log.csv"));
  EXPECT_EQ(log.epochs.size(), 4u);
}

TEST(TrainTest, ClassCountMismatchRejected) {
  Fixture f;
  f.config.model.num_classes = 3;
  EXPECT_THROW(Train(f.config, f.data), Error);
}

TEST(TrainTest, ProjectionLeavesZeroDistancePerPrototype) {
  Fixture f;
  const TrainResult r = Train(f.config, f.data);
  // The run ends with a stage-3 block, which does not move prototypes.
  const auto& sources = r.log.projections.back().provenance;
  EXPECT_EQ(sources.size(), r.params.num_prototypes());
  for (const ProjectionSource& src : sources) {
    const Tensor grid = DistanceGrid(
        ExtractFeatures(f.data.train.images[src.image_index], r.params), r.params);
    EXPECT_EQ(grid.at({src.prototype, src.location.row, src.location.col}), 0.0);
  }
}

}  // namespace
}  // namespace eppnet
