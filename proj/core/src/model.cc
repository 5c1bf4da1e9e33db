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

#include "eppnet/model.h"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "eppnet/error.h"
#include "eppnet/ops.h"
#include "eppnet/rng.h"

namespace eppnet {
namespace {

constexpr std::size_t kDownsampleWindow = 2;

Conv2DOptions BackboneConv(const ModelConfig& config) {
  return Conv2DOptions{1, config.padding};
}

void CheckImage(const Tensor& image, const ModelConfig& config) {
  const Shape expected{config.input_height, config.input_width,
                       config.input_channels};
  if (image.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                "image " + ShapeToString(image.shape()) + " expected " +
                    ShapeToString(expected));
  }
}

ConvLayer MakeLayer(std::size_t kernel, std::size_t in, std::size_t out,
                    Rng* rng) {
  ConvLayer layer{Tensor(Shape{kernel, kernel, in, out}), Tensor(Shape{out})};
  if (rng != nullptr) {
    const double stddev =
        std::sqrt(2.0 / static_cast<double>(kernel * kernel * in));
    for (double& w : layer.kernels.data()) w = stddev * rng->Normal();
  }
  return layer;
}

ModelParams MakeParams(const ModelConfig& config, Rng* rng) {
  config.Validate();
  ModelParams params;
  params.config = config;
  std::size_t channels = config.input_channels;
  for (const BackboneLayerSpec& spec : config.backbone) {
    params.backbone.push_back(
        MakeLayer(config.kernel_size, channels, spec.channels, rng));
    channels = spec.channels;
  }
  params.addon_relu = MakeLayer(1, channels, config.addon_channels, rng);
  params.addon_sigmoid =
      MakeLayer(1, config.addon_channels, config.prototype_depth, rng);

  const std::size_t m = config.num_prototypes();
  const std::size_t k = config.num_classes;
  params.prototypes = Tensor(Shape{m, config.prototype_depth});
  params.fc_weights = Tensor(Shape{m, k});
  params.proto_class.resize(m);
  params.prune_mask.assign(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    params.proto_class[j] = j / config.prototypes_per_class;
  }
  if (rng != nullptr) {
    for (double& p : params.prototypes.data()) p = rng->Uniform();
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t c = 0; c < k; ++c) {
        params.fc_weights[j * k + c] = params.proto_class[j] == c ? 1.0 : -0.5;
      }
    }
  }
  return params;
}

}  // namespace

std::pair<std::size_t, std::size_t> ModelConfig::FeatureGrid() const {
  std::size_t h = input_height;
  std::size_t w = input_width;
  for (const BackboneLayerSpec& layer : backbone) {
    if (kernel_size > h + 2 * padding || kernel_size > w + 2 * padding) {
      throw Error(ErrorCode::kInvalidArgument,
                  "backbone shrinks the input below the kernel size");
    }
    h = h + 2 * padding - kernel_size + 1;
    w = w + 2 * padding - kernel_size + 1;
    if (layer.downsample) {
      h /= kDownsampleWindow;
      w /= kDownsampleWindow;
    }
    if (h == 0 || w == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "backbone reduces the feature grid to nothing");
    }
  }
  return {h, w};
}

void ModelConfig::Validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(name) + " must be positive");
    }
  };
  positive(input_height, "input_height");
  positive(input_width, "input_width");
  positive(input_channels, "input_channels");
  positive(kernel_size, "kernel_size");
  positive(addon_channels, "addon_channels");
  positive(prototype_depth, "prototype_depth");
  positive(num_classes, "classes");
  positive(prototypes_per_class, "prototypes_per_class");
  if (backbone.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "backbone needs at least one layer");
  }
  for (const BackboneLayerSpec& layer : backbone) positive(layer.channels, "backbone channels");
  if (!(similarity_epsilon > 0.0 && similarity_epsilon < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "similarity_epsilon must lie in (0, 1)");
  }
  FeatureGrid();
}

std::vector<bool> ModelParams::ActiveMask() const {
  std::vector<bool> active(prune_mask.size());
  for (std::size_t j = 0; j < prune_mask.size(); ++j) active[j] = !prune_mask[j];
  return active;
}

bool ModelParams::BitwiseEquals(const ModelParams& other) const {
  if (!(config == other.config) || proto_class != other.proto_class ||
      prune_mask != other.prune_mask ||
      backbone.size() != other.backbone.size()) {
    return false;
  }
  const auto mine = ParamRefs(*this);
  const auto theirs = ParamRefs(other);
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (!mine[i].tensor->BitwiseEquals(*theirs[i].tensor)) return false;
  }
  return true;
}

std::vector<ParamRef> ParamRefs(ModelParams& params) {
  std::vector<ParamRef> refs;
  for (ConvLayer& layer : params.backbone) {
    refs.push_back({ParamGroup::kBackbone, &layer.kernels});
    refs.push_back({ParamGroup::kBackbone, &layer.bias});
  }
  refs.push_back({ParamGroup::kAddOn, &params.addon_relu.kernels});
  refs.push_back({ParamGroup::kAddOn, &params.addon_relu.bias});
  refs.push_back({ParamGroup::kAddOn, &params.addon_sigmoid.kernels});
  refs.push_back({ParamGroup::kAddOn, &params.addon_sigmoid.bias});
  refs.push_back({ParamGroup::kPrototypes, &params.prototypes});
  refs.push_back({ParamGroup::kClassifier, &params.fc_weights});
  return refs;
}

std::vector<ConstParamRef> ParamRefs(const ModelParams& params) {
  std::vector<ConstParamRef> out;
  for (const ParamRef& ref : ParamRefs(const_cast<ModelParams&>(params))) {
    out.push_back({ref.group, ref.tensor});
  }
  return out;
}

ModelParams InitializeParams(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, 0x1A17));
  return MakeParams(config, &rng);
}

ModelParams ZeroParams(const ModelConfig& config) {
  return MakeParams(config, nullptr);
}

FeatureMap ExtractFeatures(const Tensor& image, const ModelParams& params) {
  CheckImage(image, params.config);
  const Conv2DOptions conv = BackboneConv(params.config);
  Tensor x = image;
  for (std::size_t i = 0; i < params.backbone.size(); ++i) {
    const ConvLayer& layer = params.backbone[i];
    x = Activation(Conv2D(x, layer.kernels, &layer.bias, conv),
                   ActivationKind::kRelu);
    if (params.config.backbone[i].downsample) {
      x = MaxPool2D(x, kDownsampleWindow);
    }
  }
  x = Activation(Conv2D(x, params.addon_relu.kernels, &params.addon_relu.bias),
                 ActivationKind::kRelu);
  return Activation(
      Conv2D(x, params.addon_sigmoid.kernels, &params.addon_sigmoid.bias),
      ActivationKind::kSigmoid);
}

Tensor DistanceGrid(const FeatureMap& features, const ModelParams& params) {
  return SquaredDistances(features, params.prototypes);
}

double Similarity(double distance, double epsilon) {
  if (!(distance >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "similarity of a negative distance");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1)");
  }
  return LogSimilarity(distance, epsilon);
}

SimilarityScores ComputeSimilarityScores(const FeatureMap& features,
                                         const ModelParams& params) {
  const Tensor distances = DistanceGrid(features, params);
  const std::size_t m = distances.dim(0);
  const std::size_t width = distances.dim(2);
  const std::size_t cells = distances.dim(1) * width;
  SimilarityScores out;
  out.scores.assign(m, 0.0);
  out.locations.assign(m, std::nullopt);
  for (std::size_t j = 0; j < m; ++j) {
    if (params.prune_mask[j]) continue;
    const double* row = distances.raw() + j * cells;
    double best = LogSimilarity(row[0], params.similarity_epsilon());
    std::size_t best_cell = 0;
    for (std::size_t i = 1; i < cells; ++i) {
      const double s = LogSimilarity(row[i], params.similarity_epsilon());
      if (s > best) {
        best = s;
        best_cell = i;
      }
    }
    out.scores[j] = best;
    out.locations[j] = GridPosition{best_cell / width, best_cell % width};
  }
  return out;
}

std::vector<double> Logits(std::span<const double> scores,
                           const Tensor& fc_weights,
                           const std::vector<bool>& prune_mask) {
  if (fc_weights.rank() != 2 || fc_weights.dim(0) != scores.size() ||
      prune_mask.size() != scores.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "logits: " + std::to_string(scores.size()) +
                    " scores against FC weights " +
                    ShapeToString(fc_weights.shape()));
  }
  const std::size_t k = fc_weights.dim(1);
  std::vector<double> out(k, 0.0);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double s = prune_mask[j] ? 0.0 : scores[j];
    for (std::size_t c = 0; c < k; ++c) out[c] += s * fc_weights[j * k + c];
  }
  return out;
}

std::size_t ArgMax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Prediction Forward(const Tensor& image, const ModelParams& params) {
  const FeatureMap features = ExtractFeatures(image, params);
  const Tensor distances = DistanceGrid(features, params);
  const SimilarityScores sim = ComputeSimilarityScores(features, params);
  const std::size_t m = params.num_prototypes();
  const std::size_t cells = distances.dim(1) * distances.dim(2);

  Prediction out;
  Explanation& ex = out.explanation;
  ex.prototypes.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    PrototypeActivation& act = ex.prototypes[j];
    act.score = sim.scores[j];
    act.location = sim.locations[j];
    if (act.location) {
      act.distance = distances[j * cells + act.location->row * distances.dim(2) +
                               act.location->col];
    }
  }
  ex.logits = Logits(sim.scores, params.fc_weights, params.prune_mask);
  ex.predicted_class = ArgMax(ex.logits);
  out.probabilities = Softmax(ex.logits);
  return out;
}

std::vector<Var> BindParams(Graph& graph, const ModelParams& params,
                            TrainableGroups trainable) {
  std::vector<Var> vars;
  for (const ConstParamRef& ref : ParamRefs(params)) {
    bool train = false;
    switch (ref.group) {
      case ParamGroup::kBackbone:
      case ParamGroup::kAddOn:
        train = trainable.features;
        break;
      case ParamGroup::kPrototypes:
        train = trainable.prototypes;
        break;
      case ParamGroup::kClassifier:
        train = trainable.classifier;
        break;
    }
    vars.push_back(train ? graph.Parameter(*ref.tensor)
                         : graph.Constant(*ref.tensor));
  }
  return vars;
}

ForwardVars BuildForward(Graph& graph, std::span<const Var> param_vars,
                         const ModelParams& params, const Tensor& image) {
  CheckImage(image, params.config);
  const Conv2DOptions conv = BackboneConv(params.config);
  std::size_t next = 0;
  Var x = graph.Constant(image);
  for (std::size_t i = 0; i < params.backbone.size(); ++i) {
    const Var kernels = param_vars[next++];
    const Var bias = param_vars[next++];
    x = Activation(graph, Conv2D(graph, x, kernels, bias, conv),
                   ActivationKind::kRelu);
    if (params.config.backbone[i].downsample) {
      x = MaxPool2D(graph, x, kDownsampleWindow);
    }
  }
  {
    const Var kernels = param_vars[next++];
    const Var bias = param_vars[next++];
    x = Activation(graph, Conv2D(graph, x, kernels, bias),
                   ActivationKind::kRelu);
  }
  ForwardVars out;
  {
    const Var kernels = param_vars[next++];
    const Var bias = param_vars[next++];
    out.features = Activation(graph, Conv2D(graph, x, kernels, bias),
                              ActivationKind::kSigmoid);
  }
  const Var prototypes = param_vars[next++];
  const Var fc = param_vars[next++];
  out.distances = SquaredDistances(graph, out.features, prototypes);
  out.similarity_maps =
      LogSimilarity(graph, out.distances, params.similarity_epsilon());
  const Var raw_scores =
      GlobalMaxPoolRows(graph, out.similarity_maps, &out.argmax);
  out.scores = Mask(graph, raw_scores, params.ActiveMask());
  out.logits = MatVec(graph, out.scores, fc);
  return out;
}

std::vector<ProjectionSource> ProjectPrototypes(
    ModelParams& params, std::span<const Tensor> images,
    std::span<const std::size_t> labels) {
  if (images.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "projection: image and label counts differ");
  }
  const std::size_t k = params.num_classes();
  std::vector<std::size_t> per_class(k, 0);
  for (std::size_t label : labels) {
    if (label >= k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "projection: label " + std::to_string(label) +
                      " out of range");
    }
    ++per_class[label];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (per_class[c] == 0) {
      throw Error(ErrorCode::kEmptyInput,
                  "projection: class " + std::to_string(c) +
                      " has no training images");
    }
  }

  const std::size_t m = params.num_prototypes();
  const std::size_t depth = params.config.prototype_depth;
  std::vector<double> best(m, std::numeric_limits<double>::infinity());
  std::vector<ProjectionSource> sources(m);
  Tensor targets = params.prototypes;

  for (std::size_t i = 0; i < images.size(); ++i) {
    const FeatureMap features = ExtractFeatures(images[i], params);
    const Tensor distances = DistanceGrid(features, params);
    const std::size_t width = features.dim(1);
    const std::size_t cells = features.dim(0) * width;
    for (std::size_t j = 0; j < m; ++j) {
      if (params.prune_mask[j] || params.proto_class[j] != labels[i]) continue;
      for (std::size_t r = 0; r < cells; ++r) {
        const double d = distances[j * cells + r];
        if (d < best[j]) {
          best[j] = d;
          sources[j] = ProjectionSource{j, i, GridPosition{r / width, r % width}};
          for (std::size_t c = 0; c < depth; ++c) {
            targets[j * depth + c] = features[r * depth + c];
          }
        }
      }
    }
  }
  params.prototypes = std::move(targets);

  std::vector<ProjectionSource> provenance;
  for (std::size_t j = 0; j < m; ++j) {
    if (!params.prune_mask[j]) provenance.push_back(sources[j]);
  }
  return provenance;
}

ModelParams Prune(const ModelParams& params, double fraction,
                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "prune fraction must lie in (0, 1)");
  }
  ModelParams out = params;
  const std::size_t k = params.num_classes();
  const std::size_t cols = params.fc_weights.dim(1);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < params.num_prototypes(); ++j) {
      if (params.proto_class[j] == c && !params.prune_mask[j]) active.push_back(j);
    }
    const auto remove = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(active.size())));
    if (remove == 0 || remove >= active.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pruning " + std::to_string(remove) + " of " +
                      std::to_string(active.size()) + " prototypes of class " +
                      std::to_string(c) +
                      " must remove at least one and keep at least one");
    }
    Rng rng(DeriveSeed(seed, c));
    for (std::size_t i = 0; i < remove; ++i) {
      const std::size_t pick = i + rng.Index(active.size() - i);
      std::swap(active[i], active[pick]);
      const std::size_t j = active[i];
      out.prune_mask[j] = true;
      for (std::size_t col = 0; col < cols; ++col) {
        out.fc_weights[j * cols + col] = 0.0;
      }
    }
  }
  return out;
}

}  // namespace eppnet
