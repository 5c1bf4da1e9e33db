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

#ifndef EPPNET_GRADIENT_SUITE_H_
#define EPPNET_GRADIENT_SUITE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace eppnet {

struct GradientSuiteOptions {
  std::size_t points = 10;  // random evaluation points per check
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
};

struct GradientCheckResult {
  std::string name;
  double max_error = 0.0;  // worst over all points
  bool passed = false;
};

// Finite-difference checks of every differentiable graph operation and of the
// per-image total loss on a two-class micro-model, for each cluster objective
// and selection mode, with respect to every parameter tensor.
std::vector<GradientCheckResult> RunGradientSuite(
    const GradientSuiteOptions& options = {});

}  // namespace eppnet

#endif  // EPPNET_GRADIENT_SUITE_H_
