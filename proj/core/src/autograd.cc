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

#include "eppnet/autograd.h"

#include <cmath>
#include <string>
#include <utility>

#include "eppnet/error.h"

namespace eppnet {

constexpr double kProbabilityFloor = 1e-12;

Var Graph::Constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, nullptr});
  return Var{nodes_.size() - 1};
}

Var Graph::Parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), true, nullptr});
  return Var{nodes_.size() - 1};
}

const Tensor& Graph::grad(Var v) { return MutableGrad(v); }

Tensor& Graph::MutableGrad(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.shape() != node.value.shape() || node.grad.empty() != node.value.empty()) {
    node.grad = Tensor(node.value.shape());
  }
  return node.grad;
}

Var Graph::AddNode(Tensor value, std::span<const Var> parents,
                   BackwardFn backward) {
  bool requires_grad = false;
  for (Var p : parents) requires_grad = requires_grad || nodes_.at(p.id).requires_grad;
  nodes_.push_back(Node{std::move(value), Tensor(), requires_grad,
                        requires_grad ? std::move(backward) : nullptr});
  return Var{nodes_.size() - 1};
}

void Graph::Backward(Var root, double seed) {
  if (value(root).size() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "backward root must be scalar, got " +
                    ShapeToString(value(root).shape()));
  }
  MutableGrad(root)[0] += seed;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

namespace {

bool NeedsGrad(const Graph& g, Var v) { return g.requires_grad(v); }

}  // namespace

Var Conv2D(Graph& g, Var input, Var kernels, std::optional<Var> bias,
           const Conv2DOptions& options) {
  Tensor out = Conv2D(g.value(input), g.value(kernels),
                      bias ? &g.value(*bias) : nullptr, options);
  std::vector<Var> parents{input, kernels};
  if (bias) parents.push_back(*bias);
  return g.AddNode(
      std::move(out), parents,
      [input, kernels, bias, options](Graph& graph, std::size_t self) {
        Tensor* gin = NeedsGrad(graph, input) ? &graph.MutableGrad(input) : nullptr;
        Tensor* gk =
            NeedsGrad(graph, kernels) ? &graph.MutableGrad(kernels) : nullptr;
        Tensor* gb = bias && NeedsGrad(graph, *bias)
                         ? &graph.MutableGrad(*bias)
                         : nullptr;
        Conv2DBackward(graph.value(input), graph.value(kernels),
                       graph.GradOf(self), options, gin, gk, gb);
      });
}

Var Activation(Graph& g, Var x, ActivationKind kind) {
  const Var parents[] = {x};
  return g.AddNode(Activation(g.value(x), kind), parents,
                   [x, kind](Graph& graph, std::size_t self) {
                     ActivationBackward(graph.value(Var{self}),
                                        graph.GradOf(self), kind,
                                        &graph.MutableGrad(x));
                   });
}

Var MaxPool2D(Graph& g, Var x, std::size_t window) {
  std::vector<std::size_t> argmax;
  Tensor out = MaxPool2D(g.value(x), window, &argmax);
  const Var parents[] = {x};
  return g.AddNode(std::move(out), parents,
                   [x, argmax = std::move(argmax)](Graph& graph,
                                                   std::size_t self) {
                     Tensor& gin = graph.MutableGrad(x);
                     const Tensor& gout = graph.GradOf(self);
                     for (std::size_t i = 0; i < argmax.size(); ++i) {
                       gin[argmax[i]] += gout[i];
                     }
                   });
}

Var SquaredDistances(Graph& g, Var features, Var prototypes) {
  const Var parents[] = {features, prototypes};
  return g.AddNode(
      SquaredDistances(g.value(features), g.value(prototypes)), parents,
      [features, prototypes](Graph& graph, std::size_t self) {
        const Tensor& f = graph.value(features);
        const Tensor& p = graph.value(prototypes);
        const Tensor& gout = graph.GradOf(self);
        const std::size_t regions = f.dim(0) * f.dim(1);
        const std::size_t depth = f.dim(2);
        const std::size_t count = p.dim(0);
        Tensor* gf = NeedsGrad(graph, features) ? &graph.MutableGrad(features)
                                                : nullptr;
        Tensor* gp = NeedsGrad(graph, prototypes)
                         ? &graph.MutableGrad(prototypes)
                         : nullptr;
        for (std::size_t j = 0; j < count; ++j) {
          const double* pj = p.raw() + j * depth;
          for (std::size_t r = 0; r < regions; ++r) {
            const double weight = gout[j * regions + r];
            if (weight == 0.0) continue;
            const double* fr = f.raw() + r * depth;
            for (std::size_t c = 0; c < depth; ++c) {
              const double diff = 2.0 * weight * (fr[c] - pj[c]);
              if (gf != nullptr) (*gf)[r * depth + c] += diff;
              if (gp != nullptr) (*gp)[j * depth + c] -= diff;
            }
          }
        }
      });
}

Var LogSimilarity(Graph& g, Var distances, double epsilon) {
  const Tensor& d = g.value(distances);
  Tensor out(d.shape());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = LogSimilarity(d[i], epsilon);
  const Var parents[] = {distances};
  return g.AddNode(std::move(out), parents,
                   [distances, epsilon](Graph& graph, std::size_t self) {
                     const Tensor& dv = graph.value(distances);
                     const Tensor& gout = graph.GradOf(self);
                     Tensor& gin = graph.MutableGrad(distances);
                     for (std::size_t i = 0; i < dv.size(); ++i) {
                       if (gout[i] == 0.0) continue;
                       gin[i] += gout[i] * LogSimilarityDerivative(dv[i], epsilon);
                     }
                   });
}

Var GlobalMaxPoolRows(Graph& g, Var maps, std::vector<std::size_t>* argmax) {
  const Tensor& m = g.value(maps);
  if (m.rank() != 3 || m.dim(1) == 0 || m.dim(2) == 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "row-wise global max pool expects M x H x W, got " +
                    ShapeToString(m.shape()));
  }
  const std::size_t rows = m.dim(0);
  const std::size_t cells = m.dim(1) * m.dim(2);
  Tensor out(Shape{rows});
  std::vector<std::size_t> best(rows, 0);
  for (std::size_t j = 0; j < rows; ++j) {
    const double* row = m.raw() + j * cells;
    std::size_t b = 0;
    for (std::size_t i = 1; i < cells; ++i) {
      if (row[i] > row[b]) b = i;
    }
    best[j] = b;
    out[j] = row[b];
  }
  if (argmax != nullptr) *argmax = best;
  const Var parents[] = {maps};
  return g.AddNode(std::move(out), parents,
                   [maps, cells, best = std::move(best)](Graph& graph,
                                                         std::size_t self) {
                     Tensor& gin = graph.MutableGrad(maps);
                     const Tensor& gout = graph.GradOf(self);
                     for (std::size_t j = 0; j < best.size(); ++j) {
                       gin[j * cells + best[j]] += gout[j];
                     }
                   });
}

Var Mask(Graph& g, Var x, const std::vector<bool>& keep) {
  const Tensor& v = g.value(x);
  if (keep.size() != v.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "mask of length " + std::to_string(keep.size()) +
                    " over tensor " + ShapeToString(v.shape()));
  }
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = keep[i] ? v[i] : 0.0;
  const Var parents[] = {x};
  return g.AddNode(std::move(out), parents,
                   [x, keep](Graph& graph, std::size_t self) {
                     Tensor& gin = graph.MutableGrad(x);
                     const Tensor& gout = graph.GradOf(self);
                     for (std::size_t i = 0; i < keep.size(); ++i) {
                       if (keep[i]) gin[i] += gout[i];
                     }
                   });
}

Var MatVec(Graph& g, Var scores, Var weights) {
  const Tensor& s = g.value(scores);
  const Tensor& w = g.value(weights);
  if (s.rank() != 1 || w.rank() != 2 || w.dim(0) != s.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "matvec expects M and M x K, got " + ShapeToString(s.shape()) +
                    " and " + ShapeToString(w.shape()));
  }
  const std::size_t rows = w.dim(0);
  const std::size_t cols = w.dim(1);
  Tensor out(Shape{cols});
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t k = 0; k < cols; ++k) out[k] += s[j] * w[j * cols + k];
  }
  const Var parents[] = {scores, weights};
  return g.AddNode(
      std::move(out), parents,
      [scores, weights, rows, cols](Graph& graph, std::size_t self) {
        const Tensor& gout = graph.GradOf(self);
        if (NeedsGrad(graph, scores)) {
          const Tensor& wv = graph.value(weights);
          Tensor& gs = graph.MutableGrad(scores);
          for (std::size_t j = 0; j < rows; ++j) {
            for (std::size_t k = 0; k < cols; ++k)
              gs[j] += wv[j * cols + k] * gout[k];
          }
        }
        if (NeedsGrad(graph, weights)) {
          const Tensor& sv = graph.value(scores);
          Tensor& gw = graph.MutableGrad(weights);
          for (std::size_t j = 0; j < rows; ++j) {
            for (std::size_t k = 0; k < cols; ++k)
              gw[j * cols + k] += sv[j] * gout[k];
          }
        }
      });
}

Var SoftmaxCrossEntropy(Graph& g, Var logits, std::size_t label) {
  const Tensor& l = g.value(logits);
  if (label >= l.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "label " + std::to_string(label) + " out of range for " +
                    std::to_string(l.size()) + " classes");
  }
  std::vector<double> probs = Softmax(l.data());
  const bool clamped = probs[label] < kProbabilityFloor;
  const double loss = -std::log(clamped ? kProbabilityFloor : probs[label]);
  const Var parents[] = {logits};
  return g.AddNode(
      Tensor::Scalar(loss), parents,
      [logits, label, probs = std::move(probs)](Graph& graph,
                                                std::size_t self) {
        // The floor only guards the value; the gradient stays p - y so a
        // confidently wrong prediction can still recover.
        const double seed = graph.GradOf(self)[0];
        Tensor& gl = graph.MutableGrad(logits);
        for (std::size_t k = 0; k < probs.size(); ++k) {
          gl[k] += seed * (probs[k] - (k == label ? 1.0 : 0.0));
        }
      });
}

Var GatherMean(Graph& g, Var x, std::vector<std::size_t> indices) {
  const Tensor& v = g.value(x);
  if (indices.empty()) {
    throw Error(ErrorCode::kEmptyInput, "gather-mean over no entries");
  }
  double sum = 0.0;
  for (std::size_t i : indices) {
    if (i >= v.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "gather index " + std::to_string(i) + " out of range for " +
                      ShapeToString(v.shape()));
    }
    sum += v[i];
  }
  const double count = static_cast<double>(indices.size());
  const Var parents[] = {x};
  return g.AddNode(Tensor::Scalar(sum / count), parents,
                   [x, count, indices = std::move(indices)](Graph& graph,
                                                            std::size_t self) {
                     const double share = graph.GradOf(self)[0] / count;
                     Tensor& gin = graph.MutableGrad(x);
                     for (std::size_t i : indices) gin[i] += share;
                   });
}

Var Scale(Graph& g, Var x, double factor) {
  const Tensor& v = g.value(x);
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = factor * v[i];
  const Var parents[] = {x};
  return g.AddNode(std::move(out), parents,
                   [x, factor](Graph& graph, std::size_t self) {
                     Tensor& gin = graph.MutableGrad(x);
                     const Tensor& gout = graph.GradOf(self);
                     for (std::size_t i = 0; i < gout.size(); ++i)
                       gin[i] += factor * gout[i];
                   });
}

Var InnerProduct(Graph& g, Var x, const Tensor& weights) {
  const Tensor& v = g.value(x);
  CheckSameShape(v, weights, "inner product");
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += weights[i] * v[i];
  const Var parents[] = {x};
  return g.AddNode(Tensor::Scalar(total), parents,
                   [x, weights](Graph& graph, std::size_t self) {
                     const double seed = graph.GradOf(self)[0];
                     Tensor& gin = graph.MutableGrad(x);
                     for (std::size_t i = 0; i < gin.size(); ++i)
                       gin[i] += seed * weights[i];
                   });
}

Var WeightedSum(Graph& g, std::span<const Var> terms,
                std::span<const double> coefficients) {
  if (terms.size() != coefficients.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "weighted sum needs one coefficient per term");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (g.value(terms[i]).size() != 1) {
      throw Error(ErrorCode::kShapeMismatch, "weighted sum of non-scalars");
    }
    total += coefficients[i] * g.value(terms[i])[0];
  }
  std::vector<Var> parents(terms.begin(), terms.end());
  std::vector<double> coefs(coefficients.begin(), coefficients.end());
  return g.AddNode(Tensor::Scalar(total), parents,
                   [parents, coefs](Graph& graph, std::size_t self) {
                     const double seed = graph.GradOf(self)[0];
                     for (std::size_t i = 0; i < parents.size(); ++i) {
                       if (graph.requires_grad(parents[i]))
                         graph.MutableGrad(parents[i])[0] += coefs[i] * seed;
                     }
                   });
}

}  // namespace eppnet
