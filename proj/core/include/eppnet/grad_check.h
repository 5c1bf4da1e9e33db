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

#ifndef EPPNET_GRAD_CHECK_H_
#define EPPNET_GRAD_CHECK_H_

#include <functional>

#include "eppnet/autograd.h"
#include "eppnet/tensor.h"

namespace eppnet {

// Evaluates a scalar function at x. When gradient is non-null it receives the
// analytic gradient (same shape as x).
using DifferentiableFn = std::function<double(const Tensor& x, Tensor* gradient)>;

// Max over coordinates of |analytic - central| / max(1, |central|), where
// central = (f(x + h e_i) - f(x - h e_i)) / 2h. The caller picks a point away
// from ties and kinks.
double GradCheck(const DifferentiableFn& f, const Tensor& point,
                 double step = 1e-5);

// Adapts a graph builder (x -> scalar node) into a DifferentiableFn.
DifferentiableFn GraphFunction(std::function<Var(Graph& graph, Var x)> build);

}  // namespace eppnet

#endif  // EPPNET_GRAD_CHECK_H_
