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

#include "eppnet/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.h"
#include "eppnet/error.h"
#include "eppnet/rng.h"

namespace eppnet {
namespace {

constexpr std::size_t kPlacementAttempts = 100;
constexpr std::uint64_t kLibraryStream = 0x9A7;
constexpr std::uint64_t kImageStream = 0x1000;

void GenerateSplit(const SynthSpec& spec, const std::vector<Tensor>& parts,
                   std::size_t per_class, std::uint64_t first_index,
                   Split* split) {
  const std::size_t count = per_class * spec.num_classes;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % spec.num_classes;
    Rng rng(DeriveSeed(spec.seed, kImageStream + first_index + i));
    Tensor image(Shape{spec.height, spec.width, spec.channels});
    for (double& v : image.data()) {
      const double noise = spec.noise_amplitude == 0.0
                               ? 0.0
                               : spec.noise_amplitude * rng.Uniform(-1.0, 1.0);
      v = std::clamp(spec.background + noise, 0.0, 1.0);
    }

    std::vector<PartBox> boxes;
    for (std::size_t part : ClassParts(label)) {
      PartBox box{part, 0, 0, spec.part_size, spec.part_size};
      bool placed = false;
      for (std::size_t attempt = 0; attempt < kPlacementAttempts; ++attempt) {
        box.row = rng.Index(spec.height - spec.part_size + 1);
        box.col = rng.Index(spec.width - spec.part_size + 1);
        placed = std::none_of(boxes.begin(), boxes.end(),
                              [&](const PartBox& b) { return b.Overlaps(box); });
        if (placed) break;
      }
      if (!placed) {
        throw Error(ErrorCode::kPlacementFailed,
                    "could not place part " + std::to_string(part) +
                        " without overlap after " +
                        std::to_string(kPlacementAttempts) + " attempts");
      }
      const Tensor& motif = parts[part];
      for (std::size_t r = 0; r < spec.part_size; ++r) {
        for (std::size_t c = 0; c < spec.part_size; ++c) {
          for (std::size_t ch = 0; ch < spec.channels; ++ch) {
            image[((box.row + r) * spec.width + box.col + c) * spec.channels + ch] =
                motif[(r * spec.part_size + c) * spec.channels + ch];
          }
        }
      }
      boxes.push_back(box);
    }
    split->images.push_back(std::move(image));
    split->labels.push_back(label);
    split->boxes.push_back(std::move(boxes));
  }
}

bool SplitEquals(const Split& a, const Split& b) {
  if (a.size() != b.size() || a.labels != b.labels || a.boxes != b.boxes) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.images[i].BitwiseEquals(b.images[i])) return false;
  }
  return true;
}

}  // namespace

bool PartBox::Overlaps(const PartBox& other) const {
  return row < other.row + other.height && other.row < row + height &&
         col < other.col + other.width && other.col < col + width;
}

bool Dataset::BitwiseEquals(const Dataset& other) const {
  return num_classes == other.num_classes && height == other.height &&
         width == other.width && channels == other.channels &&
         class_names == other.class_names && SplitEquals(train, other.train) &&
         SplitEquals(test, other.test);
}

void SynthSpec::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (num_classes < 2) fail("synthetic data needs at least two classes");
  if (train_per_class == 0 || test_per_class == 0) {
    fail("every class needs train and test images");
  }
  if (channels == 0 || part_size == 0) fail("channels and part size must be positive");
  if (part_size > height || part_size > width) fail("parts do not fit inside the image");
  if (!(background >= 0.0 && background <= 1.0)) fail("background must lie in [0, 1]");
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 1.0)) {
    fail("noise amplitude must lie in [0, 1]");
  }
}

std::array<std::size_t, 2> ClassParts(std::size_t label) {
  return {label, label + 1};
}

std::vector<Tensor> PartLibrary(const SynthSpec& spec) {
  Rng rng(DeriveSeed(spec.seed, kLibraryStream));
  const std::size_t cells = spec.part_size * spec.part_size;
  std::vector<Tensor> parts;
  while (parts.size() < spec.num_parts()) {
    // Two-tone motif: a random binary pattern in a saturated colour over its
    // complement, so no motif pixel sits near the background level.
    std::vector<double> color(spec.channels);
    for (double& c : color) c = rng.Index(2) == 0 ? 0.05 : 0.95;
    std::vector<bool> mask(cells);
    std::size_t on = 0;
    for (std::size_t i = 0; i < cells; ++i) {
      mask[i] = rng.Index(2) == 1;
      on += mask[i] ? 1 : 0;
    }
    if (on < cells / 3 || on > cells - cells / 3) continue;
    Tensor motif(Shape{spec.part_size, spec.part_size, spec.channels});
    for (std::size_t i = 0; i < cells; ++i) {
      for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        motif[i * spec.channels + ch] = mask[i] ? color[ch] : 1.0 - color[ch];
      }
    }
    const bool duplicate =
        std::any_of(parts.begin(), parts.end(),
                    [&](const Tensor& p) { return p.BitwiseEquals(motif); });
    if (!duplicate) parts.push_back(std::move(motif));
  }
  return parts;
}

Dataset Generate(const SynthSpec& spec) {
  spec.Validate();
  const std::vector<Tensor> parts = PartLibrary(spec);
  Dataset out;
  out.num_classes = spec.num_classes;
  out.height = spec.height;
  out.width = spec.width;
  out.channels = spec.channels;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    out.class_names.push_back("class_" + std::to_string(k));
  }
  GenerateSplit(spec, parts, spec.train_per_class, 0, &out.train);
  GenerateSplit(spec, parts, spec.test_per_class,
                spec.train_per_class * spec.num_classes, &out.test);
  return out;
}

std::string SerializeDataset(const Dataset& dataset) {
  internal::ByteWriter w;
  w.Bytes(std::string_view(kDatasetMagic, 4));
  w.U32(kDatasetVersion);
  w.U64(dataset.num_classes);
  w.U64(dataset.train.size());
  w.U64(dataset.test.size());
  w.U64(dataset.height);
  w.U64(dataset.width);
  w.U64(dataset.channels);
  for (const std::string& name : dataset.class_names) w.String(name);
  for (const Split* split : {&dataset.train, &dataset.test}) {
    for (const Tensor& image : split->images) {
      for (double v : image.data()) w.F64(v);
    }
  }
  for (const Split* split : {&dataset.train, &dataset.test}) {
    for (std::size_t label : split->labels) w.U32(static_cast<std::uint32_t>(label));
  }
  for (const Split* split : {&dataset.train, &dataset.test}) {
    for (const auto& boxes : split->boxes) {
      w.U32(static_cast<std::uint32_t>(boxes.size()));
      for (const PartBox& b : boxes) {
        for (std::size_t v : {b.part, b.row, b.col, b.height, b.width}) {
          w.U32(static_cast<std::uint32_t>(v));
        }
      }
    }
  }
  return w.bytes();
}

Dataset DeserializeDataset(std::string_view bytes) {
  internal::ByteReader r(bytes);
  r.set_block("header");
  if (r.remaining() < 4) {
    throw Error(ErrorCode::kTruncated, "file ends inside the header block");
  }
  if (r.Bytes(4) != std::string_view(kDatasetMagic, 4)) {
    throw Error(ErrorCode::kBadMagic, "not a dataset file (expected magic EPPD)");
  }
  const std::uint32_t version = r.U32();
  if (version != kDatasetVersion) {
    throw Error(ErrorCode::kBadVersion,
                "dataset version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(kDatasetVersion) + ")");
  }
  Dataset d;
  d.num_classes = r.U64();
  const std::size_t n_train = r.U64();
  const std::size_t n_test = r.U64();
  d.height = r.U64();
  d.width = r.U64();
  d.channels = r.U64();
  const std::size_t pixels = d.height * d.width * d.channels;
  const std::size_t total = n_train + n_test;
  if (d.num_classes == 0 || pixels == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dataset header has empty dimensions");
  }

  r.set_block("class name");
  r.Checked(d.num_classes, sizeof(std::uint64_t));
  for (std::size_t k = 0; k < d.num_classes; ++k) d.class_names.push_back(r.String());

  r.set_block("image");
  r.Checked(total, pixels * sizeof(double));
  for (std::size_t i = 0; i < total; ++i) {
    Split& split = i < n_train ? d.train : d.test;
    std::vector<double> values(pixels);
    for (double& v : values) v = r.F64();
    split.images.emplace_back(Shape{d.height, d.width, d.channels}, std::move(values));
  }

  r.set_block("label");
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t label = r.U32();
    if (label >= d.num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label " + std::to_string(label) + " out of range");
    }
    (i < n_train ? d.train : d.test).labels.push_back(label);
  }

  r.set_block("part-box");
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t count = r.Checked(r.U32(), 5 * sizeof(std::uint32_t));
    std::vector<PartBox> boxes(count);
    for (PartBox& b : boxes) {
      b.part = r.U32();
      b.row = r.U32();
      b.col = r.U32();
      b.height = r.U32();
      b.width = r.U32();
      if (b.row + b.height > d.height || b.col + b.width > d.width) {
        throw Error(ErrorCode::kInvalidArgument, "part box outside the image");
      }
    }
    (i < n_train ? d.train : d.test).boxes.push_back(std::move(boxes));
  }
  return d;
}

void SaveDataset(const std::string& path, const Dataset& dataset) {
  internal::WriteFile(path, SerializeDataset(dataset));
}

Dataset LoadDataset(const std::string& path) {
  return DeserializeDataset(internal::ReadFile(path));
}

void WritePpm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw Error(ErrorCode::kShapeMismatch,
                "pixmap export needs H x W x 1 or H x W x 3, got " +
                    ShapeToString(image.shape()));
  }
  std::string bytes = "P6\n" + std::to_string(image.dim(1)) + " " +
                      std::to_string(image.dim(0)) + "\n255\n";
  const std::size_t channels = image.dim(2);
  for (std::size_t p = 0; p < image.dim(0) * image.dim(1); ++p) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double v = image[p * channels + (channels == 1 ? 0 : ch)];
      bytes.push_back(static_cast<char>(
          static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
  internal::WriteFile(path, bytes);
}

}  // namespace eppnet
