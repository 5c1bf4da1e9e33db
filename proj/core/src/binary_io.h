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

// Little-endian byte packing shared by the checkpoint and dataset formats.

#ifndef EPPNET_SRC_BINARY_IO_H_
#define EPPNET_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "eppnet/error.h"
#include "eppnet/tensor.h"

namespace eppnet::internal {

class ByteWriter {
 public:
  void Bytes(std::string_view bytes) { out_.append(bytes); }

  template <typename T>
  void Pod(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
        std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    out_.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }
  void U8(std::uint8_t v) { Pod(v); }
  void U32(std::uint32_t v) { Pod(v); }
  void U64(std::uint64_t v) { Pod(v); }
  void F64(double v) { Pod(v); }
  void String(std::string_view s) {
    U64(s.size());
    Bytes(s);
  }
  void TensorBlock(const Tensor& t) {
    U32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t extent : t.shape()) U64(extent);
    for (double v : t.data()) F64(v);
  }

  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

// Reads fields in order; running out of bytes throws kTruncated naming the
// block being read.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void set_block(std::string block) { block_ = std::move(block); }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::string_view Bytes(std::size_t n) {
    Require(n);
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T Pod() {
    Require(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
        std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  std::uint8_t U8() { return Pod<std::uint8_t>(); }
  std::uint32_t U32() { return Pod<std::uint32_t>(); }
  std::uint64_t U64() { return Pod<std::uint64_t>(); }
  double F64() { return Pod<double>(); }
  std::string String() {
    const std::uint64_t n = U64();
    return std::string(Bytes(Checked(n, 1)));
  }
  Tensor TensorBlock() {
    const std::uint32_t rank = U32();
    if (rank > 8) {
      throw Error(ErrorCode::kInvalidArgument,
                  block_ + ": implausible tensor rank " + std::to_string(rank));
    }
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& extent : shape) {
      extent = U64();
      if (extent != 0 && volume > remaining() / extent) Truncated();
      volume *= extent;
    }
    Require(Checked(volume, sizeof(double)) * sizeof(double));
    std::vector<double> values(volume);
    for (double& v : values) v = F64();
    return Tensor(std::move(shape), std::move(values));
  }

  // Guards a count read from the file against the bytes actually present.
  std::size_t Checked(std::uint64_t count, std::size_t element_size) {
    if (count > remaining() / element_size) {
      Truncated();
    }
    return static_cast<std::size_t>(count);
  }

 private:
  void Require(std::size_t n) {
    if (remaining() < n) Truncated();
  }
  [[noreturn]] void Truncated() {
    throw Error(ErrorCode::kTruncated, "file ends inside the " + block_ + " block");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string block_ = "header";
};

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view bytes);

}  // namespace eppnet::internal

#endif  // EPPNET_SRC_BINARY_IO_H_
