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

#include "eppnet/tensor.h"

#include <cmath>
#include <cstring>
#include <utility>

#include "eppnet/error.h"

namespace eppnet {

std::string ShapeToString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t ShapeVolume(const Shape& shape) {
  std::size_t volume = 1;
  for (std::size_t extent : shape) volume *= extent;
  return volume;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(ShapeVolume(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (ShapeVolume(shape_) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "shape " + ShapeToString(shape_) + " holds " +
                    std::to_string(ShapeVolume(shape_)) + " values, got " +
                    std::to_string(data_.size()));
  }
}

Tensor Tensor::Scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::Vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

std::size_t Tensor::Offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "index of rank " + std::to_string(index.size()) +
                    " into tensor " + ShapeToString(shape_));
  }
  std::size_t offset = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "index " + std::to_string(i) + " out of range on axis " +
                      std::to_string(axis) + " of " + ShapeToString(shape_));
    }
    offset = offset * shape_[axis] + i;
    ++axis;
  }
  return offset;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[Offset(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[Offset(index)];
}

void Tensor::Fill(double value) {
  for (double& v : data_) v = value;
}

Tensor Tensor::Reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::BitwiseEquals(const Tensor& other) const {
  return shape_ == other.shape_ && data_.size() == other.data_.size() &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(),
                                       data_.size() * sizeof(double)) == 0);
}

void CheckSameShape(const Tensor& a, const Tensor& b, std::string_view what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + ": " + ShapeToString(a.shape()) + " vs " +
                    ShapeToString(b.shape()));
  }
}

}  // namespace eppnet
