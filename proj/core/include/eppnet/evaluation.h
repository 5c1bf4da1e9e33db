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

#ifndef EPPNET_EVALUATION_H_
#define EPPNET_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eppnet/dataset.h"
#include "eppnet/model.h"
#include "eppnet/train_config.h"
#include "eppnet/training.h"

namespace eppnet {

// Predicted class per image: argmax of the logits, ties to the lowest class.
std::vector<std::size_t> Predict(const ModelParams& params, const Split& split);

struct AccuracyReport {
  double overall = 0.0;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> class_total;
  std::vector<std::size_t> class_correct;
  // Empty for classes with no images in the split.
  std::vector<std::optional<double>> per_class;
};

AccuracyReport AccuracyFromPredictions(std::span<const std::size_t> predictions,
                                       std::span<const std::size_t> labels,
                                       std::size_t num_classes);
AccuracyReport Accuracy(const ModelParams& params, const Split& split);

struct FaithfulnessEntry {
  std::size_t image = 0;  // index within the split
  int sign = 1;           // +1 correct, -1 wrong
  double max_logit = 0.0;
};

struct ClassFaithfulness {
  std::size_t class_index = 0;
  std::size_t count = 0;  // test images of the class
  double score = 0.0;     // mean of sign * max logit
  std::vector<FaithfulnessEntry> entries;

  // Score recomputed from `entries`.
  double Recompose() const;
};

// Per-class score from precomputed logit rows (one per image).
ClassFaithfulness FaithfulnessFromLogits(
    std::span<const std::vector<double>> logits,
    std::span<const std::size_t> labels, std::size_t class_index);
ClassFaithfulness Faithfulness(const ModelParams& params, const Split& test,
                               std::size_t class_index);

// Every class present in the split, sorted by ascending score (then class).
std::vector<ClassFaithfulness> FaithfulnessAllClasses(const ModelParams& params,
                                                      const Split& test);

struct PruneRow {
  std::uint64_t seed = 0;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double delta = 0.0;  // before - after
  std::vector<std::size_t> remaining_per_class;
};

// Prunes a fresh copy per seed and evaluates it on `split`.
std::vector<PruneRow> PruneExperiment(const ModelParams& params,
                                      const Split& split, double fraction,
                                      std::span<const std::uint64_t> seeds);

double Median(std::vector<double> values);

struct AblationRow {
  std::size_t theta = 0;
  double test_accuracy = 0.0;
};

// One full training run per theta; everything else taken from `base`.
std::vector<AblationRow> ThetaAblation(
    const TrainConfig& base, std::span<const std::size_t> thetas,
    const Dataset& dataset,
    const std::function<void(std::size_t theta, const TrainResult&)>& on_run = {});

struct CurveSamples {
  std::vector<std::size_t> epochs;
  std::vector<double> mu;
  std::vector<double> nu;
  std::vector<double> pool_mean;
  double mu_roughness = 0.0;
  double nu_roughness = 0.0;
};

CurveSamples MuNuCurves(const TrainLog& log);

struct ActivationSidecar {
  std::size_t prototype = 0;
  std::size_t class_index = 0;  // class whose FC weight is reported
  double score = 0.0;
  GridPosition location;
  double distance = 0.0;
  double weight = 0.0;
  double contribution = 0.0;  // score * weight
};

struct ActivationMap {
  std::size_t height = 0;  // input resolution
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major graymap
  ActivationSidecar sidecar;
};

// Similarity map of one unpruned prototype, upsampled by nearest neighbour to
// the input size and scaled so the minimum maps to 0 and the maximum to 255.
ActivationMap ComputeActivationMap(const ModelParams& params, const Tensor& image,
                                   std::size_t prototype, std::size_t class_index);

void WritePgm(const std::string& path, const ActivationMap& map);
std::string SidecarJson(const ActivationSidecar& sidecar);
void ExportActivationMap(const ActivationMap& map, const std::string& pgm_path,
                         const std::string& json_path);

}  // namespace eppnet

#endif  // EPPNET_EVALUATION_H_
