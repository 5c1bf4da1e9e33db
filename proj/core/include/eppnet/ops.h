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

// Forward kernels and their adjoints over plain tensors. The autograd layer in
// autograd.h wraps these; they are also used directly on evaluation paths.

#ifndef EPPNET_OPS_H_
#define EPPNET_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "eppnet/tensor.h"

namespace eppnet {

struct Conv2DOptions {
  std::size_t stride = 1;
  // Zero padding on every border. 0 gives a valid convolution.
  std::size_t padding = 0;
};

// input: H x W x C, kernels: k x k x C x F, bias: F values or nullptr.
// Output is H' x W' x F with H' = (H + 2*padding - k) / stride + 1.
Tensor Conv2D(const Tensor& input, const Tensor& kernels, const Tensor* bias,
              const Conv2DOptions& options = {});

// Accumulates (+=) the adjoints of Conv2D into every non-null output.
void Conv2DBackward(const Tensor& input, const Tensor& kernels,
                    const Tensor& grad_output, const Conv2DOptions& options,
                    Tensor* grad_input, Tensor* grad_kernels,
                    Tensor* grad_bias);

enum class ActivationKind { kRelu, kSigmoid };

double SigmoidScalar(double x);
Tensor Activation(const Tensor& x, ActivationKind kind);
// grad_input += grad_output * activation'(.), expressed via the forward output.
void ActivationBackward(const Tensor& output, const Tensor& grad_output,
                        ActivationKind kind, Tensor* grad_input);

// Shift-invariant softmax; subtracts the maximum before exponentiation.
std::vector<double> Softmax(std::span<const double> logits);

struct MaxPosition {
  double value = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};

// map: H x W. Ties resolve to the smallest row-major index.
MaxPosition GlobalMaxPool(const Tensor& map);

// Non-overlapping window x window max over an H x W x C map; trailing
// rows/cols that do not fill a window are dropped. argmax receives the flat
// input index chosen for each output element.
Tensor MaxPool2D(const Tensor& input, std::size_t window,
                 std::vector<std::size_t>* argmax = nullptr);

// features: H x W x D, prototypes: M x D. Returns M x H x W with
// entry (j, a, b) = sum_c (features[a,b,c] - prototypes[j,c])^2.
Tensor SquaredDistances(const Tensor& features, const Tensor& prototypes);

// Strictly decreasing map from a squared distance to a similarity:
// log((d + 1) / (d + epsilon)).
double LogSimilarity(double distance, double epsilon);
double LogSimilarityDerivative(double distance, double epsilon);

}  // namespace eppnet

#endif  // EPPNET_OPS_H_
