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

#include "eppnet/curves.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "eppnet/error.h"

namespace eppnet {

CurvePoint MuNu(std::span<const double> distances, std::size_t theta) {
  if (theta == 0 || theta > distances.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "theta " + std::to_string(theta) + " outside [1, " +
                    std::to_string(distances.size()) + "]");
  }
  std::vector<double> sorted(distances.begin(), distances.end());
  std::sort(sorted.begin(), sorted.end());
  CurvePoint point;
  point.mu = sorted.front();
  double selected = 0.0;
  for (std::size_t i = 0; i < theta; ++i) selected += sorted[i];
  point.nu = selected / static_cast<double>(theta);
  double all = selected;
  for (std::size_t i = theta; i < sorted.size(); ++i) all += sorted[i];
  point.pool_mean = all / static_cast<double>(distances.size());
  return point;
}

CurvePoint AverageCurvePoints(std::span<const CurvePoint> points) {
  if (points.empty()) return {};
  CurvePoint out;
  for (const CurvePoint& p : points) {
    out.mu += p.mu;
    out.nu += p.nu;
    out.pool_mean += p.pool_mean;
  }
  const double n = static_cast<double>(points.size());
  out.mu /= n;
  out.nu /= n;
  out.pool_mean /= n;
  return out;
}

double Roughness(std::span<const double> series) {
  if (series.size() < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 2; i < series.size(); ++i) {
    sum += std::abs(series[i] - 2.0 * series[i - 1] + series[i - 2]);
  }
  return sum / static_cast<double>(series.size() - 2);
}

}  // namespace eppnet
