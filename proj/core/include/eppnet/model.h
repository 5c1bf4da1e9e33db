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

#ifndef EPPNET_MODEL_H_
#define EPPNET_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eppnet/autograd.h"
#include "eppnet/tensor.h"

namespace eppnet {

struct BackboneLayerSpec {
  std::size_t channels = 0;
  // 2x2 max-downsample after this layer's ReLU.
  bool downsample = false;

  bool operator==(const BackboneLayerSpec&) const = default;
};

// Geometry of the network. The defaults give the desk-scale model: a 32x32x3
// input, three 3x3 same-padded conv layers (16, 32, 32 channels) with 2x2
// downsampling after the first two, then the 1x1 add-on layers, producing an
// 8x8x32 feature grid and 10 prototypes for each of 4 classes.
struct ModelConfig {
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::size_t input_channels = 3;
  std::vector<BackboneLayerSpec> backbone = {{16, true}, {32, true}, {32, false}};
  std::size_t kernel_size = 3;
  std::size_t padding = 1;
  std::size_t addon_channels = 32;
  std::size_t prototype_depth = 32;
  std::size_t num_classes = 4;
  std::size_t prototypes_per_class = 10;
  double similarity_epsilon = 1e-4;

  std::size_t num_prototypes() const {
    return num_classes * prototypes_per_class;
  }
  // Height and width of the feature grid the backbone produces.
  std::pair<std::size_t, std::size_t> FeatureGrid() const;
  void Validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ConvLayer {
  Tensor kernels;  // k x k x C_in x C_out
  Tensor bias;     // C_out
};

struct ModelParams {
  ModelConfig config;
  std::vector<ConvLayer> backbone;
  ConvLayer addon_relu;     // 1x1, ReLU
  ConvLayer addon_sigmoid;  // 1x1, Sigmoid; output depth is D'
  Tensor prototypes;        // M x D'
  std::vector<std::size_t> proto_class;  // prototype -> class
  Tensor fc_weights;                     // M x K
  std::vector<bool> prune_mask;          // true: prototype removed

  std::size_t num_prototypes() const { return proto_class.size(); }
  std::size_t num_classes() const { return config.num_classes; }
  double similarity_epsilon() const { return config.similarity_epsilon; }
  std::vector<bool> ActiveMask() const;

  bool BitwiseEquals(const ModelParams& other) const;
};

enum class ParamGroup { kBackbone, kAddOn, kPrototypes, kClassifier };

struct ParamRef {
  ParamGroup group;
  Tensor* tensor;
};
struct ConstParamRef {
  ParamGroup group;
  const Tensor* tensor;
};

// Every trainable tensor in a fixed order: backbone (kernels, bias) per
// layer, both add-on layers, prototypes, FC weights.
std::vector<ParamRef> ParamRefs(ModelParams& params);
std::vector<ConstParamRef> ParamRefs(const ModelParams& params);

// He-normal conv weights, zero biases, prototypes uniform in (0,1)^D', FC
// weights 1 for the owning class and -0.5 elsewhere. Prototype j belongs to
// class j / prototypes_per_class.
ModelParams InitializeParams(const ModelConfig& config, std::uint64_t seed);
// Every weight, prototype and FC entry zero.
ModelParams ZeroParams(const ModelConfig& config);

using FeatureMap = Tensor;  // H x W x D', entries in (0, 1)

struct GridPosition {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const GridPosition&) const = default;
};

FeatureMap ExtractFeatures(const Tensor& image, const ModelParams& params);
// M x H x W squared L2 distances between every prototype and region.
Tensor DistanceGrid(const FeatureMap& features, const ModelParams& params);
// log((d + 1) / (d + epsilon)); requires d >= 0 and 0 < epsilon < 1.
double Similarity(double distance, double epsilon);

struct SimilarityScores {
  std::vector<double> scores;  // 0 for pruned prototypes
  std::vector<std::optional<GridPosition>> locations;
};
SimilarityScores ComputeSimilarityScores(const FeatureMap& features,
                                         const ModelParams& params);

// l_k = sum over unpruned j of s_j * W[j, k].
std::vector<double> Logits(std::span<const double> scores,
                           const Tensor& fc_weights,
                           const std::vector<bool>& prune_mask);

struct PrototypeActivation {
  double score = 0.0;
  std::optional<GridPosition> location;
  double distance = 0.0;  // smallest distance over the grid
};

struct Explanation {
  std::vector<PrototypeActivation> prototypes;
  std::vector<double> logits;
  std::size_t predicted_class = 0;  // argmax, ties to the lowest index
};

struct Prediction {
  std::vector<double> probabilities;
  Explanation explanation;
};

Prediction Forward(const Tensor& image, const ModelParams& params);

std::size_t ArgMax(std::span<const double> values);

// Which parameter groups a graph treats as trainable.
struct TrainableGroups {
  bool features = false;    // backbone and add-on layers
  bool prototypes = false;
  bool classifier = false;
};

// One Var per ParamRefs entry, in the same order.
std::vector<Var> BindParams(Graph& graph, const ModelParams& params,
                            TrainableGroups trainable);

struct ForwardVars {
  Var features;
  Var distances;  // M x H x W
  Var similarity_maps;
  Var scores;     // masked, length M
  Var logits;
  std::vector<std::size_t> argmax;  // flat grid index per prototype
};

ForwardVars BuildForward(Graph& graph, std::span<const Var> param_vars,
                         const ModelParams& params, const Tensor& image);

struct ProjectionSource {
  std::size_t prototype = 0;
  std::size_t image_index = 0;
  GridPosition location;
};

// Replaces every unpruned prototype by its nearest feature-map region among
// training images of its own class. Ties resolve to the lowest image index,
// then the lowest region index.
std::vector<ProjectionSource> ProjectPrototypes(
    ModelParams& params, std::span<const Tensor> images,
    std::span<const std::size_t> labels);

// Masks round(fraction * active count) prototypes per class by seeded uniform
// sampling without replacement and zeroes their FC rows.
ModelParams Prune(const ModelParams& params, double fraction,
                  std::uint64_t seed);

}  // namespace eppnet

#endif  // EPPNET_MODEL_H_
