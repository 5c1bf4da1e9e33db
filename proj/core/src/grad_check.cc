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

#include "eppnet/grad_check.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "eppnet/error.h"

namespace eppnet {

double GradCheck(const DifferentiableFn& f, const Tensor& point, double step) {
  if (!(step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grad check step must be positive");
  }
  Tensor analytic(point.shape());
  const double center = f(point, &analytic);
  if (!std::isfinite(center)) {
    throw Error(ErrorCode::kNotFinite,
                "function value at the check point is not finite");
  }
  CheckSameShape(analytic, point, "grad check gradient");

  Tensor probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double plus = f(probe, nullptr);
    probe[i] = original - step;
    const double minus = f(probe, nullptr);
    probe[i] = original;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw Error(ErrorCode::kNotFinite,
                  "function not finite near coordinate " + std::to_string(i));
    }
    const double central = (plus - minus) / (2.0 * step);
    const double error =
        std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
    worst = std::max(worst, error);
  }
  return worst;
}

DifferentiableFn GraphFunction(std::function<Var(Graph& graph, Var x)> build) {
  return [build = std::move(build)](const Tensor& x, Tensor* gradient) {
    Graph graph;
    const Var input = graph.Parameter(x);
    const Var out = build(graph, input);
    const double value = graph.value(out)[0];
    if (gradient != nullptr) {
      graph.Backward(out);
      *gradient = graph.grad(input);
    }
    return value;
  };
}

}  // namespace eppnet
