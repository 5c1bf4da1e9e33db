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

// Seeded synthetic "parts" images and the on-disk dataset format.
//
// Dataset file (".eppd"), little-endian:
//
//   char[4]  magic "EPPD"
//   u32      format version (1)
//   u64 x 6  classes K, train count, test count, height, width, channels
//   K x (u64 n, n bytes)       class names
//   (train + test) x f64[H*W*C] images, train first, H x W x C row-major
//   (train + test) x u32       labels
//   (train + test) x (u32 count, count x u32[5] {part, row, col, height, width})
//                              part boxes

#ifndef EPPNET_DATASET_H_
#define EPPNET_DATASET_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eppnet/tensor.h"

namespace eppnet {

inline constexpr char kDatasetMagic[4] = {'E', 'P', 'P', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct PartBox {
  std::size_t part = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool Contains(std::size_t r, std::size_t c) const {
    return r >= row && r < row + height && c >= col && c < col + width;
  }
  bool Overlaps(const PartBox& other) const;
  bool operator==(const PartBox&) const = default;
};

struct Split {
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  std::vector<std::vector<PartBox>> boxes;

  std::size_t size() const { return images.size(); }
};

struct Dataset {
  std::size_t num_classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::string> class_names;
  Split train;
  Split test;

  bool BitwiseEquals(const Dataset& other) const;
};

struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t train_per_class = 50;
  std::size_t test_per_class = 20;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t part_size = 5;
  double background = 0.5;
  double noise_amplitude = 0.1;
  std::uint64_t seed = 0;

  // Class k is defined by parts k and k + 1, so neighbouring classes share a
  // part and the library holds K + 1 motifs.
  std::size_t num_parts() const { return num_classes + 1; }
  void Validate() const;
};

std::array<std::size_t, 2> ClassParts(std::size_t label);

// part_size x part_size x channels motifs, all pixels in [0, 1].
std::vector<Tensor> PartLibrary(const SynthSpec& spec);

// Noise background plus the class's two parts at uniformly random
// non-overlapping positions. Classes are interleaved so every split is
// balanced.
Dataset Generate(const SynthSpec& spec);

std::string SerializeDataset(const Dataset& dataset);
Dataset DeserializeDataset(std::string_view bytes);
void SaveDataset(const std::string& path, const Dataset& dataset);
Dataset LoadDataset(const std::string& path);

// Binary (P6) pixmap; single-channel images are written as gray.
void WritePpm(const std::string& path, const Tensor& image);

}  // namespace eppnet

#endif  // EPPNET_DATASET_H_
