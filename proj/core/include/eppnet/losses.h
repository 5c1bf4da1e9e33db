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

#ifndef EPPNET_LOSSES_H_
#define EPPNET_LOSSES_H_

#include <cstddef>
#include <span>
#include <vector>

#include "eppnet/autograd.h"
#include "eppnet/model.h"
#include "eppnet/tensor.h"
#include "eppnet/train_config.h"

namespace eppnet {

// Per-image distance matrices are P x R: one row per prototype in the
// relevant set (same-class or wrong-class), one column per region of the
// feature grid in row-major order.

struct SelectedPair {
  std::size_t prototype = 0;  // row of the matrix, or model index once mapped
  std::size_t region = 0;
  double distance = 0.0;
  bool operator==(const SelectedPair&) const = default;
};

// Smallest entry; ties go to the lower region index, then the lower
// prototype index.
SelectedPair SelectMinimumPair(const Tensor& distances);

// The theta pairs whose distances are averaged by the mean-cluster loss,
// in ascending (distance, region, prototype) order.
std::vector<SelectedPair> SelectClusterPairs(const Tensor& distances,
                                             std::size_t theta,
                                             SelectionMode mode);

// probs: n x K, rows summing to 1. Log is clamped below at 1e-12.
double CrossEntropy(const Tensor& probs, std::span<const std::size_t> labels);

// Mean over images of the single smallest same-class distance.
double ClusterLoss(std::span<const Tensor> same_class);

// Mean over images of the mean of the theta selected same-class distances.
double MeanClusterLoss(std::span<const Tensor> same_class, std::size_t theta,
                       SelectionMode mode);

// Minus the mean over images of the smallest wrong-class distance.
double SeparationCost(std::span<const Tensor> wrong_class);

double ComposeTotal(double ce, double cluster, double separation,
                    double lambda1, double lambda2);

struct LossBreakdown {
  double ce = 0.0;
  double cluster = 0.0;  // mean-cluster loss, or the baseline cluster cost
  double separation = 0.0;
  double total = 0.0;
  // Per image, the cluster pairs with model prototype indices.
  std::vector<std::vector<SelectedPair>> selections;
};

// Rows of an M x H x W distance grid for the unpruned prototypes that
// (in_class) do or (!in_class) do not belong to `label`, as a P x R matrix.
// prototype_ids receives the model index of every row.
Tensor ClassDistances(const Tensor& grid, const ModelParams& params,
                      std::size_t label, bool in_class,
                      std::vector<std::size_t>* prototype_ids = nullptr);

// Value of the weighted objective over a batch.
LossBreakdown TotalLoss(std::span<const Tensor> images,
                        std::span<const std::size_t> labels,
                        const ModelParams& params, const TrainConfig& config);

// Differentiable per-image objective built on top of a forward graph.
struct ImageLossVars {
  Var ce;
  Var cluster;
  Var separation;
  Var total;
  std::vector<SelectedPair> selection;
};

ImageLossVars BuildImageLoss(Graph& graph, const ForwardVars& forward,
                             const ModelParams& params, std::size_t label,
                             const TrainConfig& config);

}  // namespace eppnet

#endif  // EPPNET_LOSSES_H_
