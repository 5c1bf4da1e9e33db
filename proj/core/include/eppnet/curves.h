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

#ifndef EPPNET_CURVES_H_
#define EPPNET_CURVES_H_

#include <cstddef>
#include <span>
#include <vector>

namespace eppnet {

// Order statistics of one set of squared distances: mu is the minimum, nu the
// mean of the theta smallest, pool_mean the mean of the whole set. Always
// mu <= nu <= pool_mean.
struct CurvePoint {
  double mu = 0.0;
  double nu = 0.0;
  double pool_mean = 0.0;
};

// Throws kInvalidArgument unless 1 <= theta <= distances.size().
CurvePoint MuNu(std::span<const double> distances, std::size_t theta);

// Element-wise mean of several points (per-image points -> one epoch point).
CurvePoint AverageCurvePoints(std::span<const CurvePoint> points);

// Mean absolute second difference of a series; 0 for fewer than 3 samples.
double Roughness(std::span<const double> series);

}  // namespace eppnet

#endif  // EPPNET_CURVES_H_
