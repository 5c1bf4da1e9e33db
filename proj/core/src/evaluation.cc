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

#include <nlohmann/json.hpp>

#include "binary_io.h"
#include "eppnet/error.h"
#include "eppnet/ops.h"

namespace eppnet {

std::vector<std::size_t> Predict(const ModelParams& params, const Split& split) {
  std::vector<std::size_t> out;
  out.reserve(split.size());
  for (const Tensor& image : split.images) {
    out.push_back(Forward(image, params).explanation.predicted_class);
  }
  return out;
}

AccuracyReport AccuracyFromPredictions(std::span<const std::size_t> predictions,
                                       std::span<const std::size_t> labels,
                                       std::size_t num_classes) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyInput, "split is empty");
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  AccuracyReport report;
  report.class_total.assign(num_classes, 0);
  report.class_correct.assign(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(labels[i]) + " out of range");
    }
    ++report.class_total[labels[i]];
    if (predictions[i] == labels[i]) ++report.class_correct[labels[i]];
  }
  report.total = labels.size();
  for (std::size_t k = 0; k < num_classes; ++k) {
    report.correct += report.class_correct[k];
    if (report.class_total[k] == 0) {
      report.per_class.push_back(std::nullopt);
    } else {
      report.per_class.push_back(static_cast<double>(report.class_correct[k]) /
                                 static_cast<double>(report.class_total[k]));
    }
  }
  report.overall =
      static_cast<double>(report.correct) / static_cast<double>(report.total);
  return report;
}

AccuracyReport Accuracy(const ModelParams& params, const Split& split) {
  if (split.size() == 0) throw Error(ErrorCode::kEmptyInput, "split is empty");
  const std::vector<std::size_t> predictions = Predict(params, split);
  return AccuracyFromPredictions(predictions, split.labels, params.num_classes());
}

double ClassFaithfulness::Recompose() const {
  double sum = 0.0;
  for (const FaithfulnessEntry& e : entries) sum += e.sign * e.max_logit;
  return sum / static_cast<double>(entries.size());
}

ClassFaithfulness FaithfulnessFromLogits(
    std::span<const std::vector<double>> logits,
    std::span<const std::size_t> labels, std::size_t class_index) {
  if (logits.size() != labels.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one logit row per label required");
  }
  ClassFaithfulness out;
  out.class_index = class_index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != class_index) continue;
    if (logits[i].empty()) {
      throw Error(ErrorCode::kEmptyInput, "empty logit row for image " +
                                              std::to_string(i));
    }
    const std::size_t predicted = ArgMax(logits[i]);
    out.entries.push_back(FaithfulnessEntry{
        i, predicted == class_index ? 1 : -1, logits[i][predicted]});
  }
  if (out.entries.empty()) {
    throw Error(ErrorCode::kEmptyInput,
                "class " + std::to_string(class_index) +
                    " has no images in the test split");
  }
  out.count = out.entries.size();
  out.score = out.Recompose();
  return out;
}

namespace {

std::vector<std::vector<double>> AllLogits(const ModelParams& params,
                                           const Split& split) {
  std::vector<std::vector<double>> out;
  out.reserve(split.size());
  for (const Tensor& image : split.images) {
    out.push_back(Forward(image, params).explanation.logits);
  }
  return out;
}

}  // namespace

ClassFaithfulness Faithfulness(const ModelParams& params, const Split& test,
                               std::size_t class_index) {
  if (class_index >= params.num_classes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class " + std::to_string(class_index) + " out of range");
  }
  if (std::find(test.labels.begin(), test.labels.end(), class_index) ==
      test.labels.end()) {
    throw Error(ErrorCode::kEmptyInput,
                "class " + std::to_string(class_index) +
                    " has no images in the test split");
  }
  const auto logits = AllLogits(params, test);
  return FaithfulnessFromLogits(logits, test.labels, class_index);
}

std::vector<ClassFaithfulness> FaithfulnessAllClasses(const ModelParams& params,
                                                      const Split& test) {
  if (test.size() == 0) throw Error(ErrorCode::kEmptyInput, "test split is empty");
  const auto logits = AllLogits(params, test);
  std::vector<ClassFaithfulness> out;
  for (std::size_t k = 0; k < params.num_classes(); ++k) {
    if (std::find(test.labels.begin(), test.labels.end(), k) == test.labels.end()) {
      continue;
    }
    out.push_back(FaithfulnessFromLogits(logits, test.labels, k));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ClassFaithfulness& a, const ClassFaithfulness& b) {
                     return a.score < b.score;
                   });
  return out;
}

std::vector<PruneRow> PruneExperiment(const ModelParams& params,
                                      const Split& split, double fraction,
                                      std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw Error(ErrorCode::kEmptyInput, "no prune seeds given");
  const double before = Accuracy(params, split).overall;
  std::vector<PruneRow> rows;
  for (std::uint64_t seed : seeds) {
    const ModelParams pruned = Prune(params, fraction, seed);
    PruneRow row;
    row.seed = seed;
    row.accuracy_before = before;
    row.accuracy_after = Accuracy(pruned, split).overall;
    row.delta = row.accuracy_before - row.accuracy_after;
    row.remaining_per_class.assign(pruned.num_classes(), 0);
    for (std::size_t j = 0; j < pruned.num_prototypes(); ++j) {
      if (!pruned.prune_mask[j]) ++row.remaining_per_class[pruned.proto_class[j]];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double Median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<AblationRow> ThetaAblation(
    const TrainConfig& base, std::span<const std::size_t> thetas,
    const Dataset& dataset,
    const std::function<void(std::size_t, const TrainResult&)>& on_run) {
  if (thetas.empty()) throw Error(ErrorCode::kEmptyInput, "no theta values given");
  for (std::size_t theta : thetas) {
    TrainConfig config = base;
    config.theta = theta;
    config.Validate();
  }
  std::vector<AblationRow> rows;
  for (std::size_t theta : thetas) {
    TrainConfig config = base;
    config.theta = theta;
    const TrainResult result = Train(config, dataset);
    rows.push_back(
        AblationRow{theta, Accuracy(result.params, dataset.test).overall});
    if (on_run) on_run(theta, result);
  }
  return rows;
}

CurveSamples MuNuCurves(const TrainLog& log) {
  CurveSamples out;
  for (const EpochRecord& r : log.epochs) {
    out.epochs.push_back(r.epoch);
    out.mu.push_back(r.curve.mu);
    out.nu.push_back(r.curve.nu);
    out.pool_mean.push_back(r.curve.pool_mean);
  }
  out.mu_roughness = Roughness(out.mu);
  out.nu_roughness = Roughness(out.nu);
  return out;
}

ActivationMap ComputeActivationMap(const ModelParams& params, const Tensor& image,
                                   std::size_t prototype,
                                   std::size_t class_index) {
  if (prototype >= params.num_prototypes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "prototype " + std::to_string(prototype) + " out of range");
  }
  if (params.prune_mask[prototype]) {
    throw Error(ErrorCode::kInvalidArgument,
                "prototype " + std::to_string(prototype) + " is pruned");
  }
  if (class_index >= params.num_classes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class " + std::to_string(class_index) + " out of range");
  }
  const FeatureMap features = ExtractFeatures(image, params);
  const Tensor grid = DistanceGrid(features, params);
  const std::size_t gh = grid.dim(1);
  const std::size_t gw = grid.dim(2);
  const double eps = params.similarity_epsilon();

  std::vector<double> similarity(gh * gw);
  double min_distance = grid[prototype * gh * gw];
  for (std::size_t c = 0; c < gh * gw; ++c) {
    const double d = grid[prototype * gh * gw + c];
    similarity[c] = Similarity(d, eps);
    min_distance = std::min(min_distance, d);
  }
  const MaxPosition peak = GlobalMaxPool(Tensor({gh, gw}, similarity));
  const double low = *std::min_element(similarity.begin(), similarity.end());
  const double range = peak.value - low;

  ActivationMap map;
  map.height = image.dim(0);
  map.width = image.dim(1);
  map.pixels.resize(map.height * map.width);
  for (std::size_t y = 0; y < map.height; ++y) {
    const std::size_t row = y * gh / map.height;
    for (std::size_t x = 0; x < map.width; ++x) {
      const std::size_t col = x * gw / map.width;
      const double v = similarity[row * gw + col];
      const double scaled = range > 0.0 ? (v - low) / range * 255.0 : 255.0;
      map.pixels[y * map.width + x] =
          static_cast<std::uint8_t>(std::lround(scaled));
    }
  }

  ActivationSidecar& s = map.sidecar;
  s.prototype = prototype;
  s.class_index = class_index;
  s.score = peak.value;
  s.location = GridPosition{peak.row, peak.col};
  s.distance = min_distance;
  s.weight = params.fc_weights.at({prototype, class_index});
  s.contribution = s.score * s.weight;
  return map;
}

void WritePgm(const std::string& path, const ActivationMap& map) {
  std::string bytes = "P5\n" + std::to_string(map.width) + " " +
                      std::to_string(map.height) + "\n255\n";
  bytes.append(map.pixels.begin(), map.pixels.end());
  internal::WriteFile(path, bytes);
}

std::string SidecarJson(const ActivationSidecar& s) {
  nlohmann::ordered_json j;
  j["prototype"] = s.prototype;
  j["class"] = s.class_index;
  j["similarity"] = s.score;
  j["location"] = {{"row", s.location.row}, {"col", s.location.col}};
  j["distance"] = s.distance;
  j["fc_weight"] = s.weight;
  j["contribution"] = s.contribution;
  return j.dump(2) + "\n";
}

void ExportActivationMap(const ActivationMap& map, const std::string& pgm_path,
                         const std::string& json_path) {
  WritePgm(pgm_path, map);
  internal::WriteFile(json_path, SidecarJson(map.sidecar));
}

}  // namespace eppnet
