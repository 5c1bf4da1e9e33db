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

#include "eppnet/evaluation.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eppnet/error.h"
#include "eppnet/reports.h"
#include "gtest/gtest.h"
#include "nlohmann/json.hpp"
#include "test_util.h"

namespace eppnet {
namespace {

using testing::TempDir;
using testing::TinyConfig;
using testing::TinySpec;

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(AccuracyTest, AllCorrectIsOne) {
  const std::vector<std::size_t> labels = {0, 1, 2, 1};
  const AccuracyReport r = AccuracyFromPredictions(labels, labels, 3);
  EXPECT_EQ(r.overall, 1.0);
  EXPECT_EQ(r.correct, 4u);
}

TEST(AccuracyTest, PerClassRecomposesOverall) {
  const std::vector<std::size_t> labels = {0, 0, 0, 1, 1, 2, 2, 2, 2};
  const std::vector<std::size_t> preds = {0, 1, 0, 1, 0, 2, 2, 0, 2};
  const AccuracyReport r = AccuracyFromPredictions(preds, labels, 4);
  double recomposed = 0.0;
  std::size_t total = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    total += r.class_total[k];
    if (r.per_class[k]) recomposed += *r.per_class[k] * static_cast<double>(r.class_total[k]);
  }
  EXPECT_EQ(total, r.total);
  EXPECT_NEAR(recomposed / static_cast<double>(r.total), r.overall, 1e-12);
  EXPECT_NEAR(r.overall, 6.0 / 9.0, 1e-15);
  EXPECT_FALSE(r.per_class[3].has_value());
}

TEST(AccuracyTest, UntrainedModelNearChance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    const Dataset d = Generate(spec);
    const ModelParams params = InitializeParams(ModelConfig{}, seed);
    const double acc = Accuracy(params, d.test).overall;
    EXPECT_GE(acc, 0.10) << seed;
    EXPECT_LE(acc, 0.45) << seed;
  }
}

TEST(AccuracyTest, ZeroModelPredictsLowestClass) {
  const Dataset d = Generate(TinySpec());
  const ModelParams params = ZeroParams(TinyConfig().model);
  for (std::size_t p : Predict(params, d.test)) EXPECT_EQ(p, 0u);
}

TEST(FaithfulnessTest, SingleCorrectImage) {
  const std::vector<std::vector<double>> logits = {{2.0, 0.5}};
  const std::vector<std::size_t> labels = {0};
  EXPECT_EQ(FaithfulnessFromLogits(logits, labels, 0).score, 2.0);
}

TEST(FaithfulnessTest, MixedPairAveragesSignedMaxima) {
  const std::vector<std::vector<double>> logits = {{3.0, 1.0}, {0.2, 1.0}};
  const std::vector<std::size_t> labels = {0, 0};
  const ClassFaithfulness f = FaithfulnessFromLogits(logits, labels, 0);
  EXPECT_EQ(f.score, 1.0);
  EXPECT_EQ(f.count, 2u);
  ASSERT_EQ(f.entries.size(), 2u);
  EXPECT_EQ(f.entries[0].sign, 1);
  EXPECT_EQ(f.entries[1].sign, -1);
  EXPECT_NEAR(f.Recompose(), f.score, 1e-12);
}

TEST(FaithfulnessTest, SignLaws) {
  const std::vector<std::vector<double>> logits = {{3.0, 1.0}, {2.0, 0.1}, {0.5, 4.0}};
  const std::vector<std::size_t> right = {0, 0, 1};
  const std::vector<std::size_t> wrong = {1, 1, 0};
  EXPECT_GT(FaithfulnessFromLogits(logits, right, 0).score, 0.0);
  EXPECT_GT(FaithfulnessFromLogits(logits, right, 1).score, 0.0);
  EXPECT_LT(FaithfulnessFromLogits(logits, wrong, 0).score, 0.0);
  EXPECT_LT(FaithfulnessFromLogits(logits, wrong, 1).score, 0.0);
}

TEST(FaithfulnessTest, AbsentClassIsError) {
  const std::vector<std::vector<double>> logits = {{1.0, 0.0}};
  const std::vector<std::size_t> labels = {0};
  try {
    FaithfulnessFromLogits(logits, labels, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(FaithfulnessTest, AllClassesSortedAndRecomposable) {
  const Dataset d = Generate(TinySpec());
  const ModelParams params = InitializeParams(TinyConfig().model, 4);
  const auto all = FaithfulnessAllClasses(params, d.test);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_LE(all[0].score, all[1].score);
  for (const auto& c : all) {
    EXPECT_NEAR(c.Recompose(), c.score, 1e-12);
    EXPECT_EQ(c.count, 2u);
  }
}

TEST(PruneExperimentTest, CopiesAndLeavesHalfPerClass) {
  ModelConfig config;
  config.input_height = 12;
  config.input_width = 12;
  config.backbone = {{4, true}, {4, false}};
  config.addon_channels = 4;
  config.prototype_depth = 4;
  config.num_classes = 2;
  config.prototypes_per_class = 10;
  const ModelParams params = InitializeParams(config, 1);
  const ModelParams before = params;
  const Dataset d = Generate(TinySpec());
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  const auto rows = PruneExperiment(params, d.test, 0.5, seeds);
  EXPECT_TRUE(params.BitwiseEquals(before));
  ASSERT_EQ(rows.size(), 5u);
  for (const PruneRow& row : rows) {
    EXPECT_EQ(row.remaining_per_class, (std::vector<std::size_t>{5, 5}));
    EXPECT_EQ(row.delta, row.accuracy_before - row.accuracy_after);
    EXPECT_EQ(row.accuracy_before, rows[0].accuracy_before);
  }
}

TEST(MedianTest, OddAndEven) {
  EXPECT_EQ(Median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(Median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(Median({}), Error);
}

TEST(ThetaAblationTest, RejectsInvalidThetaBeforeTraining) {
  const Dataset d = Generate(TinySpec());
  const std::vector<std::size_t> thetas = {1, 1000};
  int runs = 0;
  EXPECT_THROW(ThetaAblation(TinyConfig(), thetas, d,
                             [&](std::size_t, const TrainResult&) { ++runs; }),
               Error);
  EXPECT_EQ(runs, 0);
}

TEST(ThetaAblationTest, ThetaOneRowMatchesBaselineRun) {
  const Dataset d = Generate(TinySpec());
  const std::vector<std::size_t> thetas = {1};
  const auto rows = ThetaAblation(TinyConfig(), thetas, d);
  TrainConfig baseline = TinyConfig();
  baseline.theta = 1;
  baseline.objective = ClusterObjective::kMinBaseline;
  const TrainResult r = Train(baseline, d);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].test_accuracy, Accuracy(r.params, d.test).overall);
}

TEST(MuNuCurvesTest, OrderedAndRough) {
  const Dataset d = Generate(TinySpec());
  const TrainResult r = Train(TinyConfig(), d);
  const CurveSamples c = MuNuCurves(r.log);
  ASSERT_EQ(c.epochs.size(), r.log.epochs.size());
  for (std::size_t i = 0; i < c.epochs.size(); ++i) {
    EXPECT_LE(c.mu[i], c.nu[i]);
    EXPECT_LE(c.nu[i], c.pool_mean[i]);
  }
  EXPECT_GE(c.mu_roughness, 0.0);
  EXPECT_GE(c.nu_roughness, 0.0);
}

class ActivationMapTest : public ::testing::Test {
 protected:
  void SetUp() override {
    params_ = InitializeParams(TinyConfig().model, 6);
    sources_ = ProjectPrototypes(params_, data_.train.images, data_.train.labels);
  }
  Dataset data_ = Generate(TinySpec());
  ModelParams params_;
  std::vector<ProjectionSource> sources_;
};

TEST_F(ActivationMapTest, NormalizedWithPeakAtProvenance) {
  for (const ProjectionSource& src : sources_) {
    const Tensor& image = data_.train.images[src.image_index];
    const ActivationMap map = ComputeActivationMap(params_, image, src.prototype,
                                                   data_.train.labels[src.image_index]);
    ASSERT_EQ(map.pixels.size(), 12u * 12u);
    EXPECT_EQ(map.sidecar.location, src.location);
    EXPECT_EQ(map.sidecar.distance, 0.0);
    EXPECT_EQ(*std::max_element(map.pixels.begin(), map.pixels.end()), 255);
    // 6x6 grid on a 12x12 input: each cell covers a 2x2 pixel block.
    for (std::size_t dr = 0; dr < 2; ++dr)
      for (std::size_t dc = 0; dc < 2; ++dc)
        EXPECT_EQ(map.pixels[(2 * src.location.row + dr) * 12 + 2 * src.location.col + dc], 255);
    EXPECT_NEAR(map.sidecar.contribution, map.sidecar.score * map.sidecar.weight, 1e-12);
    EXPECT_EQ(map.sidecar.weight,
              params_.fc_weights.at({src.prototype, map.sidecar.class_index}));
  }
}

TEST_F(ActivationMapTest, PrunedPrototypeRejected) {
  const ModelParams pruned = Prune(params_, 0.5, 0);
  std::size_t j = 0;
  while (!pruned.prune_mask[j]) ++j;
  EXPECT_THROW(ComputeActivationMap(pruned, data_.train.images[0], j, 0), Error);
}

TEST_F(ActivationMapTest, ExportWritesGraymapAndSidecar) {
  TempDir dir;
  const ActivationMap map = ComputeActivationMap(params_, data_.train.images[0], 0, 0);
  ExportActivationMap(map, dir.File("a.pgm"), dir.File("a.json"));
  const std::string pgm = Slurp(dir.File("a.pgm"));
  const std::string header = "P5\n12 12\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 144);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  const auto json = nlohmann::json::parse(Slurp(dir.File("a.json")));
  EXPECT_EQ(json.at("prototype").get<std::size_t>(), 0u);
  EXPECT_NEAR(json.at("contribution").get<double>(), map.sidecar.contribution, 1e-15);
}

TEST(ReportsTest, TrainLogCsvRoundTrip) {
  const Dataset d = Generate(TinySpec());
  const TrainResult r = Train(TinyConfig(), d);
  const std::string csv = TrainLogCsv(r.log);
  const TrainLog back = ParseTrainLogCsv(csv);
  ASSERT_EQ(back.epochs.size(), r.log.epochs.size());
  EXPECT_EQ(TrainLogCsv(back), csv);
  for (std::size_t i = 0; i < back.epochs.size(); ++i) {
    EXPECT_EQ(back.epochs[i].total, r.log.epochs[i].total);
    EXPECT_EQ(back.epochs[i].curve.nu, r.log.epochs[i].curve.nu);
  }
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "epoch,stage,ce,mclst,sep,total,train_acc,test_acc,mu,nu,pool_mean,wall_time_s");
}

TEST(ReportsTest, RejectsNonIncreasingEpochs) {
  const std::string header =
      "epoch,stage,ce,mclst,sep,total,train_acc,test_acc,mu,nu,pool_mean,wall_time_s\n";
  const std::string row = "1,stage1,1,1,1,1,0.5,0.5,0.1,0.2,0.3,0.01\n";
  EXPECT_THROW(ParseTrainLogCsv(header + row + row), Error);
}

}  // namespace
}  // namespace eppnet
