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

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include "eppnet/checkpoint.h"
#include "eppnet/error.h"
#include "eppnet/ops.h"
#include "eppnet/reports.h"
#include "eppnet/rng.h"

namespace eppnet {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5A0F;

void CheckSplit(const Split& split, const ModelParams& params,
                const char* name) {
  if (split.size() == 0) {
    throw Error(ErrorCode::kEmptyInput, std::string(name) + " split is empty");
  }
  if (split.labels.size() != split.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + " split has mismatched labels");
  }
  for (std::size_t label : split.labels) {
    if (label >= params.num_classes()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(name) + " split label " + std::to_string(label) +
                      " out of range");
    }
  }
}

std::vector<std::size_t> TrainableIndices(const ModelParams& params,
                                          bool classifier) {
  std::vector<std::size_t> out;
  const auto refs = ParamRefs(params);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if ((refs[i].group == ParamGroup::kClassifier) == classifier) out.push_back(i);
  }
  return out;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
      .count();
}

bool SameCurve(const CurvePoint& a, const CurvePoint& b) {
  return a.mu == b.mu && a.nu == b.nu && a.pool_mean == b.pool_mean;
}

}  // namespace

std::string_view StageName(Stage stage) {
  return stage == Stage::kStage1 ? "stage1" : "stage3";
}

Stage ParseStage(std::string_view text) {
  if (text == "stage1") return Stage::kStage1;
  if (text == "stage3") return Stage::kStage3;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown stage '" + std::string(text) + "'");
}

bool TrainLog::EqualsIgnoringWallTime(const TrainLog& other) const {
  if (epochs.size() != other.epochs.size() ||
      projections.size() != other.projections.size()) {
    return false;
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const EpochRecord& a = epochs[i];
    const EpochRecord& b = other.epochs[i];
    if (a.epoch != b.epoch || a.stage != b.stage || a.ce != b.ce ||
        a.cluster != b.cluster || a.separation != b.separation ||
        a.total != b.total || a.train_accuracy != b.train_accuracy ||
        a.test_accuracy != b.test_accuracy || !SameCurve(a.curve, b.curve)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < projections.size(); ++i) {
    const ProjectionRecord& a = projections[i];
    const ProjectionRecord& b = other.projections[i];
    if (a.after_epoch != b.after_epoch ||
        a.train_accuracy_before != b.train_accuracy_before ||
        a.train_accuracy_after != b.train_accuracy_after ||
        a.provenance.size() != b.provenance.size()) {
      return false;
    }
    for (std::size_t j = 0; j < a.provenance.size(); ++j) {
      const ProjectionSource& x = a.provenance[j];
      const ProjectionSource& y = b.provenance[j];
      if (x.prototype != y.prototype || x.image_index != y.image_index ||
          !(x.location == y.location)) {
        return false;
      }
    }
  }
  return true;
}

void SgdMomentum::Step(std::span<Tensor* const> params,
                       std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "optimizer step needs one gradient per parameter");
  }
  double scale = 1.0;
  if (clip_norm_ > 0.0) {
    double squared = 0.0;
    for (const Tensor& g : grads) {
      for (double v : g.data()) squared += v * v;
    }
    const double norm = std::sqrt(squared);
    if (norm > clip_norm_) scale = clip_norm_ / norm;
  }
  if (velocity_.empty()) {
    for (Tensor* p : params) velocity_.emplace_back(p->shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& v = velocity_[i];
    Tensor& w = *params[i];
    const Tensor& g = grads[i];
    CheckSameShape(w, g, "optimizer gradient");
    for (std::size_t e = 0; e < w.size(); ++e) {
      v[e] = momentum_ * v[e] + scale * g[e];
      w[e] -= learning_rate_ * v[e];
    }
  }
}

std::vector<std::size_t> EpochOrder(std::size_t count, std::uint64_t seed,
                                    std::size_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(DeriveSeed(DeriveSeed(seed, kShuffleStream), epoch));
  rng.Shuffle(order);
  return order;
}

LossBreakdown Stage1Epoch(ModelParams& params, const Split& train,
                          const TrainConfig& config, std::size_t epoch,
                          SgdMomentum& optimizer) {
  CheckSplit(train, params, "train");
  const std::size_t n = train.size();
  const std::vector<std::size_t> order = EpochOrder(n, config.seed, epoch);
  const std::vector<std::size_t> trainable = TrainableIndices(params, false);

  LossBreakdown out;
  out.selections.resize(n);
  double ce_sum = 0.0;
  double cluster_sum = 0.0;
  double separation_sum = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(n, start + config.batch_size);
    auto refs = ParamRefs(params);
    std::vector<Tensor> grads;
    std::vector<Tensor*> targets;
    for (std::size_t t : trainable) {
      grads.emplace_back(refs[t].tensor->shape());
      targets.push_back(refs[t].tensor);
    }
    for (std::size_t pos = start; pos < end; ++pos) {
      const std::size_t i = order[pos];
      Graph graph;
      const std::vector<Var> vars =
          BindParams(graph, params, TrainableGroups{true, true, false});
      const ForwardVars forward =
          BuildForward(graph, vars, params, train.images[i]);
      ImageLossVars loss =
          BuildImageLoss(graph, forward, params, train.labels[i], config);
      if (!std::isfinite(graph.value(loss.total)[0])) {
        throw Error(ErrorCode::kNotFinite,
                    "non-finite loss in stage-1 batch " +
                        std::to_string(batch_index) + " of epoch " +
                        std::to_string(epoch));
      }
      graph.Backward(loss.total);
      for (std::size_t t = 0; t < trainable.size(); ++t) {
        const Tensor& g = graph.grad(vars[trainable[t]]);
        Tensor& acc = grads[t];
        for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += g[e];
      }
      ce_sum += graph.value(loss.ce)[0];
      cluster_sum += graph.value(loss.cluster)[0];
      separation_sum += graph.value(loss.separation)[0];
      out.selections[i] = std::move(loss.selection);
    }
    const double scale = 1.0 / static_cast<double>(end - start);
    for (Tensor& g : grads) {
      for (double& v : g.data()) v *= scale;
    }
    optimizer.Step(targets, grads);
  }
  const double count = static_cast<double>(n);
  out.ce = ce_sum / count;
  out.cluster = cluster_sum / count;
  out.separation = separation_sum / count;
  out.total = ComposeTotal(out.ce, out.cluster, out.separation, config.lambda1,
                           config.lambda2);
  return out;
}

std::vector<ProjectionSource> Stage2Project(ModelParams& params,
                                            const Split& train) {
  return ProjectPrototypes(params, train.images, train.labels);
}

ImageSummary SummarizeImage(const ModelParams& params, const Tensor& image,
                            std::size_t label, const TrainConfig& config) {
  const FeatureMap features = ExtractFeatures(image, params);
  const Tensor grid = DistanceGrid(features, params);
  ImageSummary out;
  out.scores = ComputeSimilarityScores(features, params).scores;
  const Tensor same = ClassDistances(grid, params, label, true);
  const Tensor wrong = ClassDistances(grid, params, label, false);
  if (config.objective == ClusterObjective::kMinBaseline) {
    out.cluster = SelectMinimumPair(same).distance;
  } else {
    const auto pairs = SelectClusterPairs(same, config.theta, config.mode);
    double sum = 0.0;
    for (const SelectedPair& p : pairs) sum += p.distance;
    out.cluster = sum / static_cast<double>(pairs.size());
  }
  out.separation = -SelectMinimumPair(wrong).distance;
  out.curve = MuNu(same.data(), config.theta);
  return out;
}

std::vector<ImageSummary> SummarizeSplit(const ModelParams& params,
                                         const Split& split,
                                         const TrainConfig& config) {
  std::vector<ImageSummary> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    out.push_back(SummarizeImage(params, split.images[i], split.labels[i], config));
  }
  return out;
}

double SummaryAccuracy(const ModelParams& params,
                       const std::vector<ImageSummary>& summaries,
                       const Split& split) {
  if (summaries.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const std::vector<double> logits =
        Logits(summaries[i].scores, params.fc_weights, params.prune_mask);
    if (ArgMax(logits) == split.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(summaries.size());
}

LossBreakdown Stage3Epoch(ModelParams& params, const Split& train,
                          const TrainConfig& config, std::size_t epoch,
                          SgdMomentum& optimizer,
                          const std::vector<ImageSummary>* summaries) {
  CheckSplit(train, params, "train");
  std::vector<ImageSummary> computed;
  if (summaries == nullptr) {
    computed = SummarizeSplit(params, train, config);
    summaries = &computed;
  }
  const std::size_t n = train.size();
  const std::vector<std::size_t> order = EpochOrder(n, config.seed, epoch);

  LossBreakdown out;
  double ce_sum = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(n, start + config.batch_size);
    Tensor grad(params.fc_weights.shape());
    for (std::size_t pos = start; pos < end; ++pos) {
      const std::size_t i = order[pos];
      Graph graph;
      const Var scores = graph.Constant(Tensor::Vector((*summaries)[i].scores));
      const Var fc = graph.Parameter(params.fc_weights);
      const Var ce = SoftmaxCrossEntropy(graph, MatVec(graph, scores, fc),
                                         train.labels[i]);
      if (!std::isfinite(graph.value(ce)[0])) {
        throw Error(ErrorCode::kNotFinite,
                    "non-finite loss in stage-3 batch " +
                        std::to_string(batch_index) + " of epoch " +
                        std::to_string(epoch));
      }
      graph.Backward(ce);
      const Tensor& g = graph.grad(fc);
      for (std::size_t e = 0; e < grad.size(); ++e) grad[e] += g[e];
      ce_sum += graph.value(ce)[0];
    }
    const double scale = 1.0 / static_cast<double>(end - start);
    for (double& v : grad.data()) v *= scale;
    Tensor* target = &params.fc_weights;
    optimizer.Step(std::span<Tensor* const>(&target, 1),
                   std::span<const Tensor>(&grad, 1));
  }
  double cluster_sum = 0.0;
  double separation_sum = 0.0;
  for (const ImageSummary& s : *summaries) {
    cluster_sum += s.cluster;
    separation_sum += s.separation;
  }
  const double count = static_cast<double>(n);
  out.ce = ce_sum / count;
  out.cluster = cluster_sum / count;
  out.separation = separation_sum / count;
  out.total = ComposeTotal(out.ce, out.cluster, out.separation, config.lambda1,
                           config.lambda2);
  return out;
}

TrainResult Train(const TrainConfig& config_in, const Dataset& dataset,
                  const TrainOptions& options) {
  TrainConfig config = config_in;
  config.model.input_height = dataset.height;
  config.model.input_width = dataset.width;
  config.model.input_channels = dataset.channels;
  if (config.model.num_classes != dataset.num_classes) {
    throw Error(ErrorCode::kInvalidArgument,
                "config has " + std::to_string(config.model.num_classes) +
                    " classes, dataset has " +
                    std::to_string(dataset.num_classes));
  }
  config.Validate();

  TrainResult result;
  result.config = config;
  result.params = InitializeParams(config.model, config.seed);
  ModelParams& params = result.params;
  TrainLog& log = result.log;
  CheckSplit(dataset.train, params, "train");
  CheckSplit(dataset.test, params, "test");

  SgdMomentum stage1(config.stage1_learning_rate, config.momentum,
                     config.clip_norm);
  SgdMomentum stage3(config.stage3_learning_rate, config.momentum,
                     config.clip_norm);

  auto finish_epoch = [&](EpochRecord record) {
    log.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  };

  try {
    std::size_t epoch = 0;
    std::size_t cycle = 0;
    while (epoch < config.epoch_cap) {
      const std::size_t remaining = config.epoch_cap - epoch;
      std::size_t e1 = config.stage1_epochs;
      std::size_t e3 = config.stage3_epochs;
      if (remaining < e1 + e3) {
        e3 = std::min(e3, remaining / 2);
        e1 = remaining - e3;
      }

      stage1.Reset();
      std::vector<ImageSummary> train_summaries;
      std::vector<ImageSummary> test_summaries;
      for (std::size_t i = 0; i < e1; ++i) {
        const auto start = std::chrono::steady_clock::now();
        ++epoch;
        const LossBreakdown loss =
            Stage1Epoch(params, dataset.train, config, epoch, stage1);
        train_summaries = SummarizeSplit(params, dataset.train, config);
        test_summaries = SummarizeSplit(params, dataset.test, config);
        std::vector<CurvePoint> curves;
        for (const ImageSummary& s : train_summaries) curves.push_back(s.curve);
        finish_epoch(EpochRecord{
            epoch, Stage::kStage1, loss.ce, loss.cluster, loss.separation,
            loss.total, SummaryAccuracy(params, train_summaries, dataset.train),
            SummaryAccuracy(params, test_summaries, dataset.test),
            AverageCurvePoints(curves), Seconds(start)});
      }

      ProjectionRecord projection;
      projection.after_epoch = epoch;
      projection.train_accuracy_before =
          SummaryAccuracy(params, train_summaries, dataset.train);
      projection.provenance = Stage2Project(params, dataset.train);
      train_summaries = SummarizeSplit(params, dataset.train, config);
      test_summaries = SummarizeSplit(params, dataset.test, config);
      projection.train_accuracy_after =
          SummaryAccuracy(params, train_summaries, dataset.train);
      log.projections.push_back(std::move(projection));

      std::vector<CurvePoint> curves;
      for (const ImageSummary& s : train_summaries) curves.push_back(s.curve);
      const CurvePoint frozen_curve = AverageCurvePoints(curves);

      stage3.Reset();
      double previous_ce = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < e3; ++i) {
        const auto start = std::chrono::steady_clock::now();
        ++epoch;
        const LossBreakdown loss = Stage3Epoch(params, dataset.train, config,
                                               epoch, stage3, &train_summaries);
        finish_epoch(EpochRecord{
            epoch, Stage::kStage3, loss.ce, loss.cluster, loss.separation,
            loss.total, SummaryAccuracy(params, train_summaries, dataset.train),
            SummaryAccuracy(params, test_summaries, dataset.test),
            frozen_curve, Seconds(start)});
        if (previous_ce - loss.ce < config.stage3_tolerance) break;
        previous_ce = loss.ce;
      }

      ++cycle;
      if (options.checkpoint_dir) {
        const std::filesystem::path path =
            std::filesystem::path(*options.checkpoint_dir) /
            ("cycle_" + std::to_string(cycle) + ".eppn");
        SaveCheckpoint(path.string(), params, config);
      }
    }
  } catch (...) {
    if (options.log_path) WriteTrainLogCsv(*options.log_path, log);
    throw;
  }
  if (options.log_path) WriteTrainLogCsv(*options.log_path, log);
  return result;
}

}  // namespace eppnet
