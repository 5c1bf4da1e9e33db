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

// Tape-based reverse-mode differentiation. A Graph is built fresh for each
// image; nodes are appended in evaluation order, so walking the tape backwards
// is a reverse topological order and visits every node once.

#ifndef EPPNET_AUTOGRAD_H_
#define EPPNET_AUTOGRAD_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "eppnet/ops.h"
#include "eppnet/tensor.h"

namespace eppnet {

struct Var {
  std::size_t id = 0;
};

class Graph {
 public:
  // Pushes the cotangent of node `self` (available via grad()) into the
  // accumulators of its parents.
  using BackwardFn = std::function<void(Graph& graph, std::size_t self)>;

  Var Constant(Tensor value);
  Var Parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Accumulated partial derivative. Zero-filled if backward never reached v.
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // root must hold exactly one value.
  void Backward(Var root, double seed = 1.0);

  // Op plumbing.
  Var AddNode(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Tensor& MutableGrad(Var v);
  Tensor& MutableGrad(std::size_t id) { return MutableGrad(Var{id}); }
  const Tensor& GradOf(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

Var Conv2D(Graph& g, Var input, Var kernels, std::optional<Var> bias,
           const Conv2DOptions& options = {});
Var Activation(Graph& g, Var x, ActivationKind kind);
Var MaxPool2D(Graph& g, Var x, std::size_t window);
Var SquaredDistances(Graph& g, Var features, Var prototypes);
Var LogSimilarity(Graph& g, Var distances, double epsilon);
// maps: M x H x W -> M row maxima (ties to the smallest row-major index).
// argmax, when given, receives the flat within-map index per row.
Var GlobalMaxPoolRows(Graph& g, Var maps,
                      std::vector<std::size_t>* argmax = nullptr);
// Zeroes entries where keep[i] is false; their cotangent is dropped.
Var Mask(Graph& g, Var x, const std::vector<bool>& keep);
// scores: M, weights: M x K -> K with out_k = sum_j scores_j * weights_jk.
Var MatVec(Graph& g, Var scores, Var weights);
// -log(max(softmax(logits)[label], 1e-12)).
Var SoftmaxCrossEntropy(Graph& g, Var logits, std::size_t label);
// Mean of the selected flat entries of x.
Var GatherMean(Graph& g, Var x, std::vector<std::size_t> indices);
Var Scale(Graph& g, Var x, double factor);
// Scalar sum_i weights[i] * x[i]; weights must match x's shape.
Var InnerProduct(Graph& g, Var x, const Tensor& weights);
// sum_i coefficients[i] * terms[i] for scalar terms.
Var WeightedSum(Graph& g, std::span<const Var> terms,
                std::span<const double> coefficients);

}  // namespace eppnet

#endif  // EPPNET_AUTOGRAD_H_
