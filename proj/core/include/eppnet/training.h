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

#ifndef EPPNET_TRAINING_H_
#define EPPNET_TRAINING_H_

#include <cstddef>
#include <functional>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eppnet/curves.h"
#include "eppnet/dataset.h"
#include "eppnet/losses.h"
#include "eppnet/model.h"
#include "eppnet/train_config.h"

namespace eppnet {

enum class Stage { kStage1, kStage3 };
std::string_view StageName(Stage stage);
Stage ParseStage(std::string_view text);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, strictly increasing
  Stage stage = Stage::kStage1;
  double ce = 0.0;
  double cluster = 0.0;
  double separation = 0.0;
  double total = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  // Train-set average of the per-image same-class distance statistics.
  CurvePoint curve;
  double wall_seconds = 0.0;
};

struct ProjectionRecord {
  std::size_t after_epoch = 0;
  double train_accuracy_before = 0.0;
  double train_accuracy_after = 0.0;
  std::vector<ProjectionSource> provenance;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<ProjectionRecord> projections;

  // Equality of every field except wall time, bitwise on doubles.
  bool EqualsIgnoringWallTime(const TrainLog& other) const;
};

// SGD with heavy-ball momentum: v = momentum * v + g; w -= rate * v.
// With a positive clip norm, g is first rescaled so its global L2 norm over
// all parameters does not exceed it.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum, double clip_norm = 0.0)
      : learning_rate_(learning_rate), momentum_(momentum), clip_norm_(clip_norm) {}

  void Step(std::span<Tensor* const> params, std::span<const Tensor> grads);
  void Reset() { velocity_.clear(); }

 private:
  double learning_rate_;
  double momentum_;
  double clip_norm_;
  std::vector<Tensor> velocity_;
};

// Images visited in epoch order: a permutation seeded from (seed, epoch).
std::vector<std::size_t> EpochOrder(std::size_t count, std::uint64_t seed,
                                    std::size_t epoch);

// One pass of stage 1: backbone, add-on and prototypes follow the total loss;
// FC weights are untouched. Returns train-mean loss terms.
LossBreakdown Stage1Epoch(ModelParams& params, const Split& train,
                          const TrainConfig& config, std::size_t epoch,
                          SgdMomentum& optimizer);

std::vector<ProjectionSource> Stage2Project(ModelParams& params,
                                            const Split& train);

// Frozen-feature quantities that stage 3 and per-epoch evaluation reuse.
struct ImageSummary {
  std::vector<double> scores;  // masked similarity scores
  double cluster = 0.0;
  double separation = 0.0;
  CurvePoint curve;
};
ImageSummary SummarizeImage(const ModelParams& params, const Tensor& image,
                            std::size_t label, const TrainConfig& config);
std::vector<ImageSummary> SummarizeSplit(const ModelParams& params,
                                         const Split& split,
                                         const TrainConfig& config);

// One pass of stage 3: only FC weights move, against cross-entropy.
// `summaries` may be precomputed for the current features; otherwise they are
// computed here.
LossBreakdown Stage3Epoch(ModelParams& params, const Split& train,
                          const TrainConfig& config, std::size_t epoch,
                          SgdMomentum& optimizer,
                          const std::vector<ImageSummary>* summaries = nullptr);

struct TrainOptions {
  // Writes cycle_<n>.eppn after every cycle when set.
  std::optional<std::string> checkpoint_dir;
  // Written on completion, and with the partial log if training aborts.
  std::optional<std::string> log_path;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
  TrainConfig config;  // with the input geometry taken from the dataset
};

// Fraction of images whose argmax logit (ties to the lowest class) matches
// the label, using the summaries' scores and the current FC weights.
double SummaryAccuracy(const ModelParams& params,
                       const std::vector<ImageSummary>& summaries,
                       const Split& split);

// Cycles of [stage 1 x E1 -> projection -> stage 3 x E3] until the epoch cap.
// A final cycle that does not fit splits the remaining epochs between the two
// stages so it still ends with projection and FC training.
TrainResult Train(const TrainConfig& config, const Dataset& dataset,
                  const TrainOptions& options = {});

}  // namespace eppnet

#endif  // EPPNET_TRAINING_H_
