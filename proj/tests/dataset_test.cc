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

#include <cmath>

#include "eppnet/error.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace eppnet {
namespace {

using testing::TempDir;
using testing::TinySpec;

ErrorCode DecodeError(std::string_view bytes) {
  try {
    DeserializeDataset(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kInvalidArgument;
}

bool InsideAnyBox(const std::vector<PartBox>& boxes, std::size_t r, std::size_t c) {
  for (const PartBox& b : boxes) {
    if (b.Contains(r, c)) return true;
  }
  return false;
}

TEST(GenerateTest, SameSpecGivesIdenticalBytes) {
  const SynthSpec spec;
  EXPECT_EQ(SerializeDataset(Generate(spec)), SerializeDataset(Generate(spec)));
  SynthSpec other = spec;
  other.seed = 1;
  EXPECT_NE(SerializeDataset(Generate(spec)), SerializeDataset(Generate(other)));
}

TEST(GenerateTest, BalancedLabels) {
  const Dataset d = Generate(SynthSpec{});
  std::vector<int> train(4, 0), test(4, 0);
  for (std::size_t l : d.train.labels) ++train[l];
  for (std::size_t l : d.test.labels) ++test[l];
  for (int n : train) EXPECT_EQ(n, 50);
  for (int n : test) EXPECT_EQ(n, 20);
}

TEST(GenerateTest, PixelsAndBoxesInRange) {
  const Dataset d = Generate(SynthSpec{});
  for (const Split* split : {&d.train, &d.test}) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      for (double v : split->images[i].data()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
      const auto& boxes = split->boxes[i];
      ASSERT_EQ(boxes.size(), 2u);
      EXPECT_FALSE(boxes[0].Overlaps(boxes[1]));
      const auto parts = ClassParts(split->labels[i]);
      for (std::size_t b = 0; b < 2; ++b) {
        EXPECT_EQ(boxes[b].part, parts[b]);
        EXPECT_LE(boxes[b].row + boxes[b].height, d.height);
        EXPECT_LE(boxes[b].col + boxes[b].width, d.width);
      }
    }
  }
}

TEST(GenerateTest, ZeroNoiseBackgroundIsConstant) {
  SynthSpec spec;
  spec.noise_amplitude = 0.0;
  const Dataset d = Generate(spec);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const Tensor& img = d.train.images[i];
    for (std::size_t r = 0; r < d.height; ++r)
      for (std::size_t c = 0; c < d.width; ++c) {
        if (InsideAnyBox(d.train.boxes[i], r, c)) continue;
        for (std::size_t ch = 0; ch < d.channels; ++ch) {
          ASSERT_EQ(img.at({r, c, ch}), spec.background);
        }
      }
  }
}

TEST(ClassPartsTest, AdjacentClassesShareOnePart) {
  for (std::size_t k = 0; k + 1 < 6; ++k) {
    const auto a = ClassParts(k);
    const auto b = ClassParts(k + 1);
    EXPECT_NE(a, b);
    EXPECT_EQ(a[1], b[0]);
  }
}

TEST(PartLibraryTest, MotifsAreDistinct) {
  const auto parts = PartLibrary(SynthSpec{});
  ASSERT_EQ(parts.size(), 5u);
  for (std::size_t a = 0; a < parts.size(); ++a)
    for (std::size_t b = a + 1; b < parts.size(); ++b)
      EXPECT_FALSE(parts[a].BitwiseEquals(parts[b]));
}

// Brute-force oracle: find which part templates occur verbatim, then pick the
// class whose two parts were both found.
TEST(GenerateTest, NearestTemplateOracleIsPerfectWithoutNoise) {
  SynthSpec spec;
  spec.noise_amplitude = 0.0;
  const Dataset d = Generate(spec);
  const auto library = PartLibrary(spec);
  const std::size_t s = spec.part_size;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const Tensor& img = d.test.images[i];
    std::vector<bool> found(library.size(), false);
    for (std::size_t p = 0; p < library.size(); ++p) {
      for (std::size_t r = 0; r + s <= d.height && !found[p]; ++r)
        for (std::size_t c = 0; c + s <= d.width && !found[p]; ++c) {
          bool match = true;
          for (std::size_t dr = 0; dr < s && match; ++dr)
            for (std::size_t dc = 0; dc < s && match; ++dc)
              for (std::size_t ch = 0; ch < d.channels && match; ++ch)
                match = img.at({r + dr, c + dc, ch}) == library[p].at({dr, dc, ch});
          found[p] = match;
        }
    }
    std::vector<std::size_t> candidates;
    for (std::size_t k = 0; k < d.num_classes; ++k) {
      const auto parts = ClassParts(k);
      if (found[parts[0]] && found[parts[1]]) candidates.push_back(k);
    }
    if (candidates.size() == 1 && candidates[0] == d.test.labels[i]) ++correct;
  }
  EXPECT_EQ(correct, d.test.size());
}

TEST(GenerateTest, ImpossiblePlacementFails) {
  SynthSpec spec = TinySpec();
  spec.height = 6;
  spec.width = 6;
  spec.part_size = 4;
  try {
    Generate(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kPlacementFailed ||
                e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST(DatasetFileTest, RoundTripIsBitwise) {
  TempDir dir;
  SynthSpec spec = TinySpec();
  spec.train_per_class = 3;
  spec.test_per_class = 2;  // ten images
  const Dataset d = Generate(spec);
  SaveDataset(dir.File("d.eppd"), d);
  const Dataset back = LoadDataset(dir.File("d.eppd"));
  EXPECT_TRUE(back.BitwiseEquals(d));
  EXPECT_EQ(SerializeDataset(back), SerializeDataset(d));
}

TEST(DatasetFileTest, CorruptedMagic) {
  std::string bytes = SerializeDataset(Generate(TinySpec()));
  bytes[1] = 'Q';
  EXPECT_EQ(DecodeError(bytes), ErrorCode::kBadMagic);
}

TEST(DatasetFileTest, UnsupportedVersion) {
  std::string bytes = SerializeDataset(Generate(TinySpec()));
  bytes[4] = 2;
  EXPECT_EQ(DecodeError(bytes), ErrorCode::kBadVersion);
}

TEST(DatasetFileTest, TruncatedLabelBlockNamesTheBlock) {
  const Dataset d = Generate(TinySpec());
  const std::string bytes = SerializeDataset(d);
  std::size_t offset = 4 + 4 + 6 * 8;
  for (const std::string& name : d.class_names) offset += 8 + name.size();
  const std::size_t images = d.train.size() + d.test.size();
  offset += images * d.height * d.width * d.channels * 8;
  try {
    DeserializeDataset(bytes.substr(0, offset + 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncated);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos) << e.what();
  }
}

TEST(DatasetFileTest, PixmapExport) {
  TempDir dir;
  const Dataset d = Generate(TinySpec());
  WritePpm(dir.File("x.ppm"), d.train.images[0]);
  EXPECT_EQ(std::filesystem::file_size(dir.File("x.ppm")),
            std::string("P6\n12 12\n255\n").size() + 12 * 12 * 3);
}

}  // namespace
}  // namespace eppnet
