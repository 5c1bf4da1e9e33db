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

#include "eppnet/train_config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "eppnet/error.h"

namespace eppnet {
namespace {

const std::set<std::string, std::less<>>& Keys() {
  static const std::set<std::string, std::less<>> keys = {
      "input_height",    "input_width",       "input_channels",
      "backbone",        "kernel_size",       "padding",
      "addon_channels",  "prototype_depth",   "classes",
      "prototypes_per_class", "similarity_epsilon", "theta",
      "lambda1",         "lambda2",           "selection_mode",
      "cluster_objective", "stage1_epochs",   "stage3_epochs",
      "epoch_cap",       "stage1_lr",         "stage3_lr",
      "momentum",        "clip_norm",         "batch_size",        "stage3_tolerance",
      "seed"};
  return keys;
}

std::string FormatBackbone(const std::vector<BackboneLayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(layers[i].channels);
    if (layers[i].downsample) out += ":pool";
  }
  return out;
}

std::vector<BackboneLayerSpec> ParseBackbone(std::string_view text) {
  std::vector<BackboneLayerSpec> layers;
  std::stringstream stream{std::string(text)};
  std::string item;
  while (std::getline(stream, item, ',')) {
    BackboneLayerSpec layer;
    std::string channels = item;
    const auto colon = item.find(':');
    if (colon != std::string::npos) {
      if (item.substr(colon + 1) != "pool") {
        throw Error(ErrorCode::kInvalidArgument,
                    "backbone layer '" + item + "' has an unknown suffix");
      }
      layer.downsample = true;
      channels = item.substr(0, colon);
    }
    layer.channels = ParseUnsigned("backbone", channels);
    layers.push_back(layer);
  }
  return layers;
}

}  // namespace

std::string_view SelectionModeName(SelectionMode mode) {
  return mode == SelectionMode::kDistinctPairs ? "distinct-pairs"
                                               : "distinct-regions";
}

SelectionMode ParseSelectionMode(std::string_view text) {
  if (text == "distinct-pairs") return SelectionMode::kDistinctPairs;
  if (text == "distinct-regions") return SelectionMode::kDistinctRegions;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown selection mode '" + std::string(text) +
                  "' (expected distinct-pairs or distinct-regions)");
}

std::string_view ClusterObjectiveName(ClusterObjective objective) {
  return objective == ClusterObjective::kMeanCluster ? "mean-cluster"
                                                     : "cluster-baseline";
}

ClusterObjective ParseClusterObjective(std::string_view text) {
  if (text == "mean-cluster") return ClusterObjective::kMeanCluster;
  if (text == "cluster-baseline") return ClusterObjective::kMinBaseline;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown cluster objective '" + std::string(text) +
                  "' (expected mean-cluster or cluster-baseline)");
}

std::string FormatDouble(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double ParseDouble(std::string_view key, std::string_view text) {
  std::string owned(text);
  char* end = nullptr;
  const double value = std::strtod(owned.c_str(), &end);
  if (owned.empty() || end != owned.c_str() + owned.size() ||
      !std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(key) + ": '" + owned + "' is not a finite number");
  }
  return value;
}

std::uint64_t ParseUnsigned(std::string_view key, std::string_view text) {
  std::uint64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(key) + ": '" + std::string(text) +
                    "' is not a non-negative integer");
  }
  return value;
}

bool IsTrainConfigKey(std::string_view key) {
  return Keys().find(key) != Keys().end();
}

void TrainConfig::Validate() const {
  model.Validate();
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (theta == 0) fail("theta must be positive");
  if (stage1_epochs == 0 || stage3_epochs == 0 || epoch_cap == 0 ||
      batch_size == 0) {
    fail("epoch counts and batch size must be positive");
  }
  if (!(stage1_learning_rate > 0.0) || !(stage3_learning_rate > 0.0)) {
    fail("learning rates must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(clip_norm >= 0.0)) fail("clip_norm must be >= 0");
  if (!(stage3_tolerance >= 0.0)) fail("stage3_tolerance must be >= 0");
  const auto [h, w] = model.FeatureGrid();
  const std::size_t regions = h * w;
  const std::size_t bound = mode == SelectionMode::kDistinctPairs
                                ? regions * model.prototypes_per_class
                                : regions;
  if (theta > bound) {
    fail("theta " + std::to_string(theta) + " exceeds the " +
         std::string(SelectionModeName(mode)) + " bound of " +
         std::to_string(bound));
  }
  if (model.num_classes < 2) fail("at least two classes are required");
}

std::map<std::string, std::string> TrainConfig::ToKeyValues() const {
  std::map<std::string, std::string> kv;
  kv["input_height"] = std::to_string(model.input_height);
  kv["input_width"] = std::to_string(model.input_width);
  kv["input_channels"] = std::to_string(model.input_channels);
  kv["backbone"] = FormatBackbone(model.backbone);
  kv["kernel_size"] = std::to_string(model.kernel_size);
  kv["padding"] = std::to_string(model.padding);
  kv["addon_channels"] = std::to_string(model.addon_channels);
  kv["prototype_depth"] = std::to_string(model.prototype_depth);
  kv["classes"] = std::to_string(model.num_classes);
  kv["prototypes_per_class"] = std::to_string(model.prototypes_per_class);
  kv["similarity_epsilon"] = FormatDouble(model.similarity_epsilon);
  kv["theta"] = std::to_string(theta);
  kv["lambda1"] = FormatDouble(lambda1);
  kv["lambda2"] = FormatDouble(lambda2);
  kv["selection_mode"] = std::string(SelectionModeName(mode));
  kv["cluster_objective"] = std::string(ClusterObjectiveName(objective));
  kv["stage1_epochs"] = std::to_string(stage1_epochs);
  kv["stage3_epochs"] = std::to_string(stage3_epochs);
  kv["epoch_cap"] = std::to_string(epoch_cap);
  kv["stage1_lr"] = FormatDouble(stage1_learning_rate);
  kv["stage3_lr"] = FormatDouble(stage3_learning_rate);
  kv["momentum"] = FormatDouble(momentum);
  kv["batch_size"] = std::to_string(batch_size);
  kv["clip_norm"] = FormatDouble(clip_norm);
  kv["stage3_tolerance"] = FormatDouble(stage3_tolerance);
  kv["seed"] = std::to_string(seed);
  return kv;
}

void TrainConfig::ApplyKeyValues(
    const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (!IsTrainConfigKey(key)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown training key '" + key + "'");
    }
    if (key == "input_height") model.input_height = ParseUnsigned(key, value);
    else if (key == "input_width") model.input_width = ParseUnsigned(key, value);
    else if (key == "input_channels") model.input_channels = ParseUnsigned(key, value);
    else if (key == "backbone") model.backbone = ParseBackbone(value);
    else if (key == "kernel_size") model.kernel_size = ParseUnsigned(key, value);
    else if (key == "padding") model.padding = ParseUnsigned(key, value);
    else if (key == "addon_channels") model.addon_channels = ParseUnsigned(key, value);
    else if (key == "prototype_depth") model.prototype_depth = ParseUnsigned(key, value);
    else if (key == "classes") model.num_classes = ParseUnsigned(key, value);
    else if (key == "prototypes_per_class") model.prototypes_per_class = ParseUnsigned(key, value);
    else if (key == "similarity_epsilon") model.similarity_epsilon = ParseDouble(key, value);
    else if (key == "theta") theta = ParseUnsigned(key, value);
    else if (key == "lambda1") lambda1 = ParseDouble(key, value);
    else if (key == "lambda2") lambda2 = ParseDouble(key, value);
    else if (key == "selection_mode") mode = ParseSelectionMode(value);
    else if (key == "cluster_objective") objective = ParseClusterObjective(value);
    else if (key == "stage1_epochs") stage1_epochs = ParseUnsigned(key, value);
    else if (key == "stage3_epochs") stage3_epochs = ParseUnsigned(key, value);
    else if (key == "epoch_cap") epoch_cap = ParseUnsigned(key, value);
    else if (key == "stage1_lr") stage1_learning_rate = ParseDouble(key, value);
    else if (key == "stage3_lr") stage3_learning_rate = ParseDouble(key, value);
    else if (key == "momentum") momentum = ParseDouble(key, value);
    else if (key == "batch_size") batch_size = ParseUnsigned(key, value);
    else if (key == "clip_norm") clip_norm = ParseDouble(key, value);
    else if (key == "stage3_tolerance") stage3_tolerance = ParseDouble(key, value);
    else if (key == "seed") seed = ParseUnsigned(key, value);
  }
}

}  // namespace eppnet
