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

#include "eppnet/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "eppnet/error.h"

namespace eppnet {
namespace {

struct ConvGeometry {
  std::size_t in_h, in_w, channels, kernel, filters, out_h, out_w;
};

ConvGeometry CheckConv(const Tensor& input, const Tensor& kernels,
                       const Tensor* bias, const Conv2DOptions& options) {
  if (input.rank() != 3 || kernels.rank() != 4) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d expects input HxWxC and kernels kxkxCxF, got " +
                    ShapeToString(input.shape()) + " and " +
                    ShapeToString(kernels.shape()));
  }
  if (kernels.dim(0) != kernels.dim(1)) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d kernels must be square, got " +
                    ShapeToString(kernels.shape()));
  }
  if (input.dim(2) != kernels.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d channel mismatch: input " +
                    ShapeToString(input.shape()) + " vs kernels " +
                    ShapeToString(kernels.shape()));
  }
  if (options.stride == 0) {
    throw Error(ErrorCode::kInvalidArgument, "conv2d stride must be positive");
  }
  ConvGeometry g;
  g.in_h = input.dim(0);
  g.in_w = input.dim(1);
  g.channels = input.dim(2);
  g.kernel = kernels.dim(0);
  g.filters = kernels.dim(3);
  const std::size_t padded_h = g.in_h + 2 * options.padding;
  const std::size_t padded_w = g.in_w + 2 * options.padding;
  if (g.kernel > padded_h || g.kernel > padded_w) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d kernel " + ShapeToString(kernels.shape()) +
                    " larger than input " + ShapeToString(input.shape()));
  }
  if (bias != nullptr &&
      (bias->rank() != 1 || bias->dim(0) != g.filters)) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d bias " + ShapeToString(bias->shape()) +
                    " does not match kernels " +
                    ShapeToString(kernels.shape()));
  }
  g.out_h = (padded_h - g.kernel) / options.stride + 1;
  g.out_w = (padded_w - g.kernel) / options.stride + 1;
  return g;
}

// Maps an output coordinate and kernel tap to an input coordinate; returns
// false when the tap lands in the zero padding.
inline bool InputCoord(std::size_t out, std::size_t tap, std::size_t stride,
                       std::size_t padding, std::size_t extent,
                       std::size_t* in) {
  const std::size_t shifted = out * stride + tap;
  if (shifted < padding) return false;
  *in = shifted - padding;
  return *in < extent;
}

}  // namespace

Tensor Conv2D(const Tensor& input, const Tensor& kernels, const Tensor* bias,
              const Conv2DOptions& options) {
  const ConvGeometry g = CheckConv(input, kernels, bias, options);
  Tensor output(Shape{g.out_h, g.out_w, g.filters});
  const double* in = input.raw();
  const double* w = kernels.raw();
  double* out = output.raw();
  const std::size_t f_count = g.filters;

  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* acc = out + (oy * g.out_w + ox) * f_count;
      if (bias != nullptr) {
        std::copy_n(bias->raw(), f_count, acc);
      }
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        std::size_t iy;
        if (!InputCoord(oy, ky, options.stride, options.padding, g.in_h, &iy))
          continue;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          std::size_t ix;
          if (!InputCoord(ox, kx, options.stride, options.padding, g.in_w,
                          &ix))
            continue;
          const double* pixel = in + (iy * g.in_w + ix) * g.channels;
          const double* tap = w + (ky * g.kernel + kx) * g.channels * f_count;
          for (std::size_t c = 0; c < g.channels; ++c) {
            const double v = pixel[c];
            const double* w_row = tap + c * f_count;
            for (std::size_t f = 0; f < f_count; ++f) acc[f] += v * w_row[f];
          }
        }
      }
    }
  }
  return output;
}

void Conv2DBackward(const Tensor& input, const Tensor& kernels,
                    const Tensor& grad_output, const Conv2DOptions& options,
                    Tensor* grad_input, Tensor* grad_kernels,
                    Tensor* grad_bias) {
  const ConvGeometry g = CheckConv(input, kernels, nullptr, options);
  if (grad_output.shape() != Shape{g.out_h, g.out_w, g.filters}) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d output gradient " +
                    ShapeToString(grad_output.shape()) + " expected " +
                    ShapeToString(Shape{g.out_h, g.out_w, g.filters}));
  }
  if (grad_input != nullptr) CheckSameShape(*grad_input, input, "conv2d grad");
  if (grad_kernels != nullptr)
    CheckSameShape(*grad_kernels, kernels, "conv2d kernel grad");
  const std::size_t f_count = g.filters;
  const double* in = input.raw();
  const double* w = kernels.raw();
  const double* gout = grad_output.raw();
  double* gin = grad_input != nullptr ? grad_input->raw() : nullptr;
  double* gw = grad_kernels != nullptr ? grad_kernels->raw() : nullptr;

  if (grad_bias != nullptr) {
    double* gb = grad_bias->raw();
    for (std::size_t p = 0; p < g.out_h * g.out_w; ++p) {
      const double* row = gout + p * f_count;
      for (std::size_t f = 0; f < f_count; ++f) gb[f] += row[f];
    }
  }
  if (gin == nullptr && gw == nullptr) return;

  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const double* go = gout + (oy * g.out_w + ox) * f_count;
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        std::size_t iy;
        if (!InputCoord(oy, ky, options.stride, options.padding, g.in_h, &iy))
          continue;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          std::size_t ix;
          if (!InputCoord(ox, kx, options.stride, options.padding, g.in_w,
                          &ix))
            continue;
          const std::size_t pixel_offset = (iy * g.in_w + ix) * g.channels;
          const std::size_t tap_offset =
              (ky * g.kernel + kx) * g.channels * f_count;
          for (std::size_t c = 0; c < g.channels; ++c) {
            const std::size_t row = tap_offset + c * f_count;
            if (gw != nullptr) {
              const double v = in[pixel_offset + c];
              double* gw_row = gw + row;
              for (std::size_t f = 0; f < f_count; ++f) gw_row[f] += v * go[f];
            }
            if (gin != nullptr) {
              const double* w_row = w + row;
              double sum = 0.0;
              for (std::size_t f = 0; f < f_count; ++f) sum += w_row[f] * go[f];
              gin[pixel_offset + c] += sum;
            }
          }
        }
      }
    }
  }
}

double SigmoidScalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor Activation(const Tensor& x, ActivationKind kind) {
  Tensor out(x.shape());
  const double* in = x.raw();
  double* o = out.raw();
  const std::size_t n = x.size();
  if (kind == ActivationKind::kRelu) {
    for (std::size_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) o[i] = SigmoidScalar(in[i]);
  }
  return out;
}

void ActivationBackward(const Tensor& output, const Tensor& grad_output,
                        ActivationKind kind, Tensor* grad_input) {
  CheckSameShape(output, grad_output, "activation grad");
  CheckSameShape(output, *grad_input, "activation grad");
  const double* y = output.raw();
  const double* g = grad_output.raw();
  double* gi = grad_input->raw();
  const std::size_t n = output.size();
  if (kind == ActivationKind::kRelu) {
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] > 0.0) gi[i] += g[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
  }
}

std::vector<double> Softmax(std::span<const double> logits) {
  if (logits.empty()) {
    throw Error(ErrorCode::kEmptyInput, "softmax of an empty vector");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

MaxPosition GlobalMaxPool(const Tensor& map) {
  if (map.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                "global max pool expects an HxW map, got " +
                    ShapeToString(map.shape()));
  }
  if (map.empty()) {
    throw Error(ErrorCode::kEmptyInput, "global max pool over an empty map");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < map.size(); ++i) {
    if (map[i] > map[best]) best = i;
  }
  const std::size_t width = map.dim(1);
  return MaxPosition{map[best], best / width, best % width};
}

Tensor MaxPool2D(const Tensor& input, std::size_t window,
                 std::vector<std::size_t>* argmax) {
  if (input.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "max pool expects HxWxC, got " + ShapeToString(input.shape()));
  }
  if (window == 0 || window > input.dim(0) || window > input.dim(1)) {
    throw Error(ErrorCode::kInvalidArgument,
                "max pool window " + std::to_string(window) +
                    " does not fit " + ShapeToString(input.shape()));
  }
  const std::size_t in_w = input.dim(1);
  const std::size_t channels = input.dim(2);
  const std::size_t out_h = input.dim(0) / window;
  const std::size_t out_w = in_w / window;
  Tensor output(Shape{out_h, out_w, channels});
  if (argmax != nullptr) argmax->assign(output.size(), 0);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      for (std::size_t c = 0; c < channels; ++c) {
        std::size_t best = ((oy * window) * in_w + ox * window) * channels + c;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx =
                ((oy * window + dy) * in_w + (ox * window + dx)) * channels +
                c;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t out_idx = (oy * out_w + ox) * channels + c;
        output[out_idx] = input[best];
        if (argmax != nullptr) (*argmax)[out_idx] = best;
      }
    }
  }
  return output;
}

Tensor SquaredDistances(const Tensor& features, const Tensor& prototypes) {
  if (features.rank() != 3 || prototypes.rank() != 2 ||
      features.dim(2) != prototypes.dim(1)) {
    throw Error(ErrorCode::kShapeMismatch,
                "distance grid expects features HxWxD and prototypes MxD, got " +
                    ShapeToString(features.shape()) + " and " +
                    ShapeToString(prototypes.shape()));
  }
  const std::size_t regions = features.dim(0) * features.dim(1);
  const std::size_t depth = features.dim(2);
  const std::size_t count = prototypes.dim(0);
  Tensor out(Shape{count, features.dim(0), features.dim(1)});
  for (std::size_t j = 0; j < count; ++j) {
    const double* p = prototypes.raw() + j * depth;
    for (std::size_t r = 0; r < regions; ++r) {
      const double* f = features.raw() + r * depth;
      double sum = 0.0;
      for (std::size_t c = 0; c < depth; ++c) {
        const double diff = f[c] - p[c];
        sum += diff * diff;
      }
      out[j * regions + r] = sum;
    }
  }
  return out;
}

double LogSimilarity(double distance, double epsilon) {
  return std::log((distance + 1.0) / (distance + epsilon));
}

double LogSimilarityDerivative(double distance, double epsilon) {
  return 1.0 / (distance + 1.0) - 1.0 / (distance + epsilon);
}

}  // namespace eppnet
