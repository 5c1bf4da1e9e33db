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

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "eppnet/error.h"
#include "eppnet/ops.h"

namespace eppnet {
namespace {

constexpr double kProbabilityFloor = 1e-12;

void CheckMatrix(const Tensor& distances, const char* what) {
  if (distances.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + " expects a prototypes x regions matrix, got " +
                    ShapeToString(distances.shape()));
  }
  if (distances.empty()) {
    throw Error(ErrorCode::kEmptyInput,
                std::string(what) + ": image has no candidate prototypes");
  }
}

bool PairLess(const SelectedPair& a, const SelectedPair& b) {
  return std::tie(a.distance, a.region, a.prototype) <
         std::tie(b.distance, b.region, b.prototype);
}

double MeanOf(std::span<const SelectedPair> pairs) {
  double sum = 0.0;
  for (const SelectedPair& p : pairs) sum += p.distance;
  return sum / static_cast<double>(pairs.size());
}

}  // namespace

SelectedPair SelectMinimumPair(const Tensor& distances) {
  CheckMatrix(distances, "minimum pair");
  const std::size_t regions = distances.dim(1);
  SelectedPair best{0, 0, distances[0]};
  for (std::size_t p = 0; p < distances.dim(0); ++p) {
    for (std::size_t r = 0; r < regions; ++r) {
      const SelectedPair candidate{p, r, distances[p * regions + r]};
      if (PairLess(candidate, best)) best = candidate;
    }
  }
  return best;
}

std::vector<SelectedPair> SelectClusterPairs(const Tensor& distances,
                                             std::size_t theta,
                                             SelectionMode mode) {
  CheckMatrix(distances, "cluster selection");
  const std::size_t protos = distances.dim(0);
  const std::size_t regions = distances.dim(1);
  const std::size_t bound =
      mode == SelectionMode::kDistinctPairs ? protos * regions : regions;
  if (theta == 0 || theta > bound) {
    throw Error(ErrorCode::kInvalidArgument,
                "theta " + std::to_string(theta) + " outside [1, " +
                    std::to_string(bound) + "] for " +
                    std::string(SelectionModeName(mode)));
  }

  std::vector<SelectedPair> candidates;
  if (mode == SelectionMode::kDistinctPairs) {
    candidates.reserve(protos * regions);
    for (std::size_t p = 0; p < protos; ++p) {
      for (std::size_t r = 0; r < regions; ++r) {
        candidates.push_back({p, r, distances[p * regions + r]});
      }
    }
  } else {
    // Taking the global minimum and removing its region, repeatedly, is the
    // same as ranking regions by their own best pair.
    candidates.reserve(regions);
    for (std::size_t r = 0; r < regions; ++r) {
      SelectedPair best{0, r, distances[r]};
      for (std::size_t p = 1; p < protos; ++p) {
        const double d = distances[p * regions + r];
        if (d < best.distance) best = {p, r, d};
      }
      candidates.push_back(best);
    }
  }
  std::partial_sort(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(theta),
                    candidates.end(), PairLess);
  candidates.resize(theta);
  return candidates;
}

double CrossEntropy(const Tensor& probs, std::span<const std::size_t> labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size() || labels.empty()) {
    throw Error(ErrorCode::kShapeMismatch,
                "cross entropy: probabilities " + ShapeToString(probs.shape()) +
                    " for " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = probs.dim(1);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cross entropy: label " + std::to_string(labels[i]) +
                      " out of range for " + std::to_string(k) + " classes");
    }
    double row_sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) row_sum += probs[i * k + c];
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cross entropy: probability row " + std::to_string(i) +
                      " does not sum to 1");
    }
    sum += -std::log(std::max(probs[i * k + labels[i]], kProbabilityFloor));
  }
  return sum / static_cast<double>(labels.size());
}

double ClusterLoss(std::span<const Tensor> same_class) {
  if (same_class.empty()) throw Error(ErrorCode::kEmptyInput, "cluster loss over no images");
  double sum = 0.0;
  for (const Tensor& d : same_class) sum += SelectMinimumPair(d).distance;
  return sum / static_cast<double>(same_class.size());
}

double MeanClusterLoss(std::span<const Tensor> same_class, std::size_t theta,
                       SelectionMode mode) {
  if (same_class.empty()) {
    throw Error(ErrorCode::kEmptyInput, "mean-cluster loss over no images");
  }
  double sum = 0.0;
  for (const Tensor& d : same_class) {
    sum += MeanOf(SelectClusterPairs(d, theta, mode));
  }
  return sum / static_cast<double>(same_class.size());
}

double SeparationCost(std::span<const Tensor> wrong_class) {
  if (wrong_class.empty()) {
    throw Error(ErrorCode::kEmptyInput, "separation cost over no images");
  }
  double sum = 0.0;
  for (const Tensor& d : wrong_class) {
    if (d.rank() == 2 && d.empty()) {
      throw Error(ErrorCode::kEmptyInput,
                  "separation cost needs a wrong-class prototype");
    }
    sum += SelectMinimumPair(d).distance;
  }
  return -(sum / static_cast<double>(wrong_class.size()));
}

double ComposeTotal(double ce, double cluster, double separation,
                    double lambda1, double lambda2) {
  return ce + lambda1 * cluster + lambda2 * separation;
}

Tensor ClassDistances(const Tensor& grid, const ModelParams& params,
                      std::size_t label, bool in_class,
                      std::vector<std::size_t>* prototype_ids) {
  if (grid.rank() != 3 || grid.dim(0) != params.num_prototypes()) {
    throw Error(ErrorCode::kShapeMismatch,
                "distance grid " + ShapeToString(grid.shape()) + " for " +
                    std::to_string(params.num_prototypes()) + " prototypes");
  }
  const std::size_t regions = grid.dim(1) * grid.dim(2);
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < params.num_prototypes(); ++j) {
    if (params.prune_mask[j]) continue;
    if ((params.proto_class[j] == label) == in_class) ids.push_back(j);
  }
  Tensor out(Shape{ids.size(), regions});
  for (std::size_t row = 0; row < ids.size(); ++row) {
    std::copy_n(grid.raw() + ids[row] * regions, regions,
                out.raw() + row * regions);
  }
  if (prototype_ids != nullptr) *prototype_ids = std::move(ids);
  return out;
}

LossBreakdown TotalLoss(std::span<const Tensor> images,
                        std::span<const std::size_t> labels,
                        const ModelParams& params, const TrainConfig& config) {
  if (images.empty() || images.size() != labels.size()) {
    throw Error(ErrorCode::kEmptyInput,
                "total loss needs a nonempty batch with one label per image");
  }
  const std::size_t n = images.size();
  const std::size_t k = params.num_classes();
  Tensor probs(Shape{n, k});
  std::vector<Tensor> same;
  std::vector<Tensor> wrong;
  LossBreakdown out;
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureMap features = ExtractFeatures(images[i], params);
    const Tensor grid = DistanceGrid(features, params);
    const SimilarityScores sim = ComputeSimilarityScores(features, params);
    const std::vector<double> p =
        Softmax(Logits(sim.scores, params.fc_weights, params.prune_mask));
    std::copy(p.begin(), p.end(), probs.raw() + i * k);
    std::vector<std::size_t> ids;
    same.push_back(ClassDistances(grid, params, labels[i], true, &ids));
    wrong.push_back(ClassDistances(grid, params, labels[i], false));
    std::vector<SelectedPair> chosen =
        config.objective == ClusterObjective::kMinBaseline
            ? std::vector<SelectedPair>{SelectMinimumPair(same.back())}
            : SelectClusterPairs(same.back(), config.theta, config.mode);
    for (SelectedPair& pair : chosen) pair.prototype = ids[pair.prototype];
    out.selections.push_back(std::move(chosen));
  }
  out.ce = CrossEntropy(probs, labels);
  out.cluster = config.objective == ClusterObjective::kMinBaseline
                    ? ClusterLoss(same)
                    : MeanClusterLoss(same, config.theta, config.mode);
  out.separation = SeparationCost(wrong);
  out.total = ComposeTotal(out.ce, out.cluster, out.separation, config.lambda1,
                           config.lambda2);
  return out;
}

ImageLossVars BuildImageLoss(Graph& graph, const ForwardVars& forward,
                             const ModelParams& params, std::size_t label,
                             const TrainConfig& config) {
  const Tensor& grid = graph.value(forward.distances);
  const std::size_t regions = grid.dim(1) * grid.dim(2);

  std::vector<std::size_t> same_ids;
  const Tensor same = ClassDistances(grid, params, label, true, &same_ids);
  std::vector<std::size_t> wrong_ids;
  const Tensor wrong = ClassDistances(grid, params, label, false, &wrong_ids);

  ImageLossVars out;
  out.selection = config.objective == ClusterObjective::kMinBaseline
                      ? std::vector<SelectedPair>{SelectMinimumPair(same)}
                      : SelectClusterPairs(same, config.theta, config.mode);
  std::vector<std::size_t> cluster_entries;
  for (SelectedPair& pair : out.selection) {
    pair.prototype = same_ids[pair.prototype];
    cluster_entries.push_back(pair.prototype * regions + pair.region);
  }
  const SelectedPair nearest_wrong = SelectMinimumPair(wrong);

  out.ce = SoftmaxCrossEntropy(graph, forward.logits, label);
  out.cluster = GatherMean(graph, forward.distances, std::move(cluster_entries));
  out.separation = Scale(
      graph,
      GatherMean(graph, forward.distances,
                 {wrong_ids[nearest_wrong.prototype] * regions +
                  nearest_wrong.region}),
      -1.0);
  const Var terms[] = {out.ce, out.cluster, out.separation};
  const double weights[] = {1.0, config.lambda1, config.lambda2};
  out.total = WeightedSum(graph, terms, weights);
  return out;
}

}  // namespace eppnet
