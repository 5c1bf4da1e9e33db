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

#ifndef EPPNET_TRAIN_CONFIG_H_
#define EPPNET_TRAIN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "eppnet/model.h"

namespace eppnet {

// How the theta cluster distances are chosen for one image.
enum class SelectionMode {
  // The theta smallest entries of the region x prototype distance matrix; a
  // region may recur with different prototypes.
  kDistinctPairs,
  // Repeatedly take the global minimum and drop its region.
  kDistinctRegions,
};

enum class ClusterObjective {
  kMeanCluster,   // mean of the theta smallest same-class distances
  kMinBaseline,   // single smallest same-class distance
};

std::string_view SelectionModeName(SelectionMode mode);
SelectionMode ParseSelectionMode(std::string_view text);
std::string_view ClusterObjectiveName(ClusterObjective objective);
ClusterObjective ParseClusterObjective(std::string_view text);

struct TrainConfig {
  ModelConfig model;

  std::size_t theta = 10;
  double lambda1 = 0.8;
  // Weight of the separation term. The separation term is already negated,
  // so a positive weight pushes wrong-class distances up.
  double lambda2 = 0.8;
  SelectionMode mode = SelectionMode::kDistinctPairs;
  ClusterObjective objective = ClusterObjective::kMeanCluster;

  std::size_t stage1_epochs = 10;
  std::size_t stage3_epochs = 5;
  std::size_t epoch_cap = 100;
  double stage1_learning_rate = 0.01;
  double stage3_learning_rate = 0.05;
  double momentum = 0.9;
  // Global L2 norm cap on each batch gradient; 0 disables clipping.
  double clip_norm = 2.0;
  std::size_t batch_size = 16;
  // Stage 3 stops early once the epoch's train cross-entropy improves by less
  // than this.
  double stage3_tolerance = 1e-5;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument on any out-of-range field.
  void Validate() const;

  // Flat key=value form used by checkpoints and run configs. Keys are stable;
  // doubles are printed in shortest round-trip form so parsing is exact.
  std::map<std::string, std::string> ToKeyValues() const;
  // Applies the recognised keys in `values` over the current fields. Unknown
  // keys throw.
  void ApplyKeyValues(const std::map<std::string, std::string>& values);

  bool operator==(const TrainConfig&) const = default;
};

bool IsTrainConfigKey(std::string_view key);

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);
double ParseDouble(std::string_view key, std::string_view text);
std::uint64_t ParseUnsigned(std::string_view key, std::string_view text);

}  // namespace eppnet

#endif  // EPPNET_TRAIN_CONFIG_H_
