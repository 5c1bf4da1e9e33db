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

#include "eppnet/gradient_suite.h"

#include <algorithm>
#include <functional>

#include "eppnet/autograd.h"
#include "eppnet/grad_check.h"
#include "eppnet/losses.h"
#include "eppnet/model.h"
#include "eppnet/rng.h"
#include "eppnet/train_config.h"

namespace eppnet {
namespace {

Tensor RandomTensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.Uniform(lo, hi);
  return t;
}

// Builds the scalar graph for one point: x is the checked input, and the
// callback may draw the remaining constants from rng.
using PointBuilder = std::function<Var(Graph& graph, Var x)>;

struct OpCheck {
  std::string name;
  // Returns (point, builder) for a fresh point.
  std::function<std::pair<Tensor, PointBuilder>(Rng& rng)> make;
};

// Reduces a non-scalar node to a scalar with fixed random weights.
PointBuilder Projected(std::function<Var(Graph&, Var)> op, Tensor weights) {
  return [op = std::move(op), weights = std::move(weights)](Graph& g, Var x) {
    return InnerProduct(g, op(g, x), weights);
  };
}

std::vector<OpCheck> OperationChecks() {
  std::vector<OpCheck> checks;
  auto add = [&](std::string name, auto make) {
    checks.push_back(OpCheck{std::move(name), make});
  };
  const Conv2DOptions same{1, 1};
  const Conv2DOptions strided{2, 0};

  add("conv2d/input", [=](Rng& rng) {
    Tensor k = RandomTensor(rng, {3, 3, 2, 3});
    Tensor b = RandomTensor(rng, {3});
    Tensor w = RandomTensor(rng, {5, 5, 3});
    return std::pair{RandomTensor(rng, {5, 5, 2}),
                     Projected([=](Graph& g, Var x) {
                       return Conv2D(g, x, g.Constant(k), g.Constant(b), same);
                     }, w)};
  });
  add("conv2d/kernels", [=](Rng& rng) {
    Tensor in = RandomTensor(rng, {5, 5, 2});
    Tensor b = RandomTensor(rng, {3});
    Tensor w = RandomTensor(rng, {5, 5, 3});
    return std::pair{RandomTensor(rng, {3, 3, 2, 3}),
                     Projected([=](Graph& g, Var x) {
                       return Conv2D(g, g.Constant(in), x, g.Constant(b), same);
                     }, w)};
  });
  add("conv2d/bias", [=](Rng& rng) {
    Tensor in = RandomTensor(rng, {5, 5, 2});
    Tensor k = RandomTensor(rng, {3, 3, 2, 3});
    Tensor w = RandomTensor(rng, {5, 5, 3});
    return std::pair{RandomTensor(rng, {3}),
                     Projected([=](Graph& g, Var x) {
                       return Conv2D(g, g.Constant(in), g.Constant(k), x, same);
                     }, w)};
  });
  add("conv2d-strided/input", [=](Rng& rng) {
    Tensor k = RandomTensor(rng, {3, 3, 2, 2});
    Tensor w = RandomTensor(rng, {3, 3, 2});
    return std::pair{RandomTensor(rng, {7, 7, 2}),
                     Projected([=](Graph& g, Var x) {
                       return Conv2D(g, x, g.Constant(k), std::nullopt, strided);
                     }, w)};
  });
  add("conv2d-strided/kernels", [=](Rng& rng) {
    Tensor in = RandomTensor(rng, {7, 7, 2});
    Tensor w = RandomTensor(rng, {3, 3, 2});
    return std::pair{RandomTensor(rng, {3, 3, 2, 2}),
                     Projected([=](Graph& g, Var x) {
                       return Conv2D(g, g.Constant(in), x, std::nullopt, strided);
                     }, w)};
  });
  add("relu", [](Rng& rng) {
    Tensor x = RandomTensor(rng, {4, 4, 2});
    // Keep every entry away from the kink.
    for (double& v : x.data()) v += v < 0.0 ? -0.05 : 0.05;
    return std::pair{x, Projected([](Graph& g, Var v) {
                       return Activation(g, v, ActivationKind::kRelu);
                     }, RandomTensor(rng, {4, 4, 2}))};
  });
  add("sigmoid", [](Rng& rng) {
    return std::pair{RandomTensor(rng, {4, 4, 2}, -3.0, 3.0),
                     Projected([](Graph& g, Var v) {
                       return Activation(g, v, ActivationKind::kSigmoid);
                     }, RandomTensor(rng, {4, 4, 2}))};
  });
  add("max_pool", [](Rng& rng) {
    return std::pair{RandomTensor(rng, {6, 6, 2}),
                     Projected([](Graph& g, Var v) { return MaxPool2D(g, v, 2); },
                               RandomTensor(rng, {3, 3, 2}))};
  });
  add("squared_distances/features", [](Rng& rng) {
    Tensor protos = RandomTensor(rng, {3, 4}, 0.0, 1.0);
    return std::pair{RandomTensor(rng, {3, 3, 4}, 0.0, 1.0),
                     Projected([=](Graph& g, Var v) {
                       return SquaredDistances(g, v, g.Constant(protos));
                     }, RandomTensor(rng, {3, 3, 3}))};
  });
  add("squared_distances/prototypes", [](Rng& rng) {
    Tensor features = RandomTensor(rng, {3, 3, 4}, 0.0, 1.0);
    return std::pair{RandomTensor(rng, {3, 4}, 0.0, 1.0),
                     Projected([=](Graph& g, Var v) {
                       return SquaredDistances(g, g.Constant(features), v);
                     }, RandomTensor(rng, {3, 3, 3}))};
  });
  add("log_similarity", [](Rng& rng) {
    return std::pair{RandomTensor(rng, {3, 2, 2}, 0.05, 2.0),
                     Projected([](Graph& g, Var v) {
                       return LogSimilarity(g, v, 1e-4);
                     }, RandomTensor(rng, {3, 2, 2}))};
  });
  add("global_max_pool", [](Rng& rng) {
    return std::pair{RandomTensor(rng, {3, 3, 3}),
                     Projected([](Graph& g, Var v) {
                       return GlobalMaxPoolRows(g, v);
                     }, RandomTensor(rng, {3}))};
  });
  add("mask", [](Rng& rng) {
    const std::vector<bool> keep = {true, false, true, true, false};
    return std::pair{RandomTensor(rng, {5}),
                     Projected([=](Graph& g, Var v) { return Mask(g, v, keep); },
                               RandomTensor(rng, {5}))};
  });
  add("matvec/scores", [](Rng& rng) {
    Tensor weights = RandomTensor(rng, {4, 3});
    return std::pair{RandomTensor(rng, {4}),
                     Projected([=](Graph& g, Var v) {
                       return MatVec(g, v, g.Constant(weights));
                     }, RandomTensor(rng, {3}))};
  });
  add("matvec/weights", [](Rng& rng) {
    Tensor scores = RandomTensor(rng, {4});
    return std::pair{RandomTensor(rng, {4, 3}),
                     Projected([=](Graph& g, Var v) {
                       return MatVec(g, g.Constant(scores), v);
                     }, RandomTensor(rng, {3}))};
  });
  add("softmax_cross_entropy", [](Rng& rng) {
    const std::size_t label = rng.Index(4);
    return std::pair{RandomTensor(rng, {4}, -2.0, 2.0),
                     PointBuilder([=](Graph& g, Var v) {
                       return SoftmaxCrossEntropy(g, v, label);
                     })};
  });
  add("gather_mean", [](Rng&) {
    Rng local(7);
    return std::pair{RandomTensor(local, {6}), PointBuilder([](Graph& g, Var v) {
                       return GatherMean(g, v, {4, 1, 1, 5});
                     })};
  });
  add("scale", [](Rng& rng) {
    return std::pair{RandomTensor(rng, {3}),
                     Projected([](Graph& g, Var v) { return Scale(g, v, -1.7); },
                               RandomTensor(rng, {3}))};
  });
  add("inner_product", [](Rng& rng) {
    return std::pair{RandomTensor(rng, {2, 3}),
                     Projected([](Graph&, Var v) { return v; },
                               RandomTensor(rng, {2, 3}))};
  });
  add("weighted_sum", [](Rng& rng) {
    Tensor a = RandomTensor(rng, {3});
    Tensor b = RandomTensor(rng, {3});
    return std::pair{RandomTensor(rng, {3}), PointBuilder([=](Graph& g, Var v) {
                       const Var terms[] = {InnerProduct(g, v, a),
                                            InnerProduct(g, v, b)};
                       const double coefs[] = {0.8, -0.3};
                       return WeightedSum(g, terms, coefs);
                     })};
  });
  return checks;
}

TrainConfig MicroConfig() {
  TrainConfig config;
  config.model.input_height = 6;
  config.model.input_width = 6;
  config.model.input_channels = 3;
  config.model.backbone = {{3, true}, {3, false}};
  config.model.addon_channels = 3;
  config.model.prototype_depth = 3;
  config.model.num_classes = 2;
  config.model.prototypes_per_class = 2;
  config.theta = 3;
  return config;
}

const char* TensorRole(std::size_t index, std::size_t backbone_layers) {
  static const char* kNames[] = {"addon_relu/kernels", "addon_relu/bias",
                                 "addon_sigmoid/kernels", "addon_sigmoid/bias",
                                 "prototypes", "fc"};
  if (index < 2 * backbone_layers) {
    return index % 2 == 0 ? "backbone/kernels" : "backbone/bias";
  }
  return kNames[index - 2 * backbone_layers];
}

}  // namespace

std::vector<GradientCheckResult> RunGradientSuite(
    const GradientSuiteOptions& options) {
  std::vector<GradientCheckResult> results;
  Rng rng(DeriveSeed(options.seed, 0x6C));

  for (const OpCheck& check : OperationChecks()) {
    double worst = 0.0;
    for (std::size_t p = 0; p < options.points; ++p) {
      auto [point, builder] = check.make(rng);
      worst = std::max(worst, GradCheck(GraphFunction(builder), point,
                                        options.step));
    }
    results.push_back({check.name, worst, worst <= options.tolerance});
  }

  struct Variant {
    const char* name;
    ClusterObjective objective;
    SelectionMode mode;
  };
  const Variant variants[] = {
      {"total_loss/mean-cluster/distinct-pairs", ClusterObjective::kMeanCluster,
       SelectionMode::kDistinctPairs},
      {"total_loss/mean-cluster/distinct-regions", ClusterObjective::kMeanCluster,
       SelectionMode::kDistinctRegions},
      {"total_loss/cluster-baseline", ClusterObjective::kMinBaseline,
       SelectionMode::kDistinctPairs},
  };
  for (const Variant& variant : variants) {
    TrainConfig config = MicroConfig();
    config.objective = variant.objective;
    config.mode = variant.mode;
    const std::size_t layers = config.model.backbone.size();
    const std::size_t tensors = 2 * layers + 6;
    std::vector<double> worst(tensors, 0.0);
    for (std::size_t p = 0; p < options.points; ++p) {
      ModelParams params = InitializeParams(config.model, rng.NextU64());
      // Nonzero biases and perturbed weights keep ReLU inputs off the kink.
      for (ParamRef ref : ParamRefs(params)) {
        for (double& v : ref.tensor->data()) v += 0.1 * rng.Normal();
      }
      const Tensor image = RandomTensor(rng, {6, 6, 3}, 0.0, 1.0);
      const std::size_t label = rng.Index(2);
      for (std::size_t t = 0; t < tensors; ++t) {
        DifferentiableFn f = [&, t](const Tensor& x, Tensor* gradient) {
          ModelParams local = params;
          *ParamRefs(local)[t].tensor = x;
          Graph graph;
          const std::vector<Var> vars =
              BindParams(graph, local, TrainableGroups{true, true, true});
          const ForwardVars forward = BuildForward(graph, vars, local, image);
          const ImageLossVars loss =
              BuildImageLoss(graph, forward, local, label, config);
          if (gradient != nullptr) {
            graph.Backward(loss.total);
            *gradient = graph.grad(vars[t]);
          }
          return graph.value(loss.total)[0];
        };
        worst[t] = std::max(
            worst[t], GradCheck(f, *ParamRefs(params)[t].tensor, options.step));
      }
    }
    for (std::size_t t = 0; t < tensors; ++t) {
      std::string name = std::string(variant.name) + "/" + TensorRole(t, layers);
      if (t < 2 * layers) name += std::to_string(t / 2);
      results.push_back({name, worst[t], worst[t] <= options.tolerance});
    }
  }
  return results;
}

}  // namespace eppnet
