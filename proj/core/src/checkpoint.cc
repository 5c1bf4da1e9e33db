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

#include "eppnet/checkpoint.h"

#include <fstream>
#include <sstream>

#include "binary_io.h"
#include "eppnet/error.h"

namespace eppnet {

namespace internal {

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to '" + path + "'");
}

}  // namespace internal

std::string FormatKeyValues(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [key, value] : values) out += key + "=" + value + "\n";
  return out;
}

std::map<std::string, std::string> ParseKeyValues(std::string_view text) {
  auto trim = [](std::string s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return std::string();
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  };
  std::map<std::string, std::string> out;
  std::istringstream stream{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(stream, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config line " + std::to_string(number) +
                      " is not key=value: '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config line " + std::to_string(number) + " has an empty key");
    }
    if (!out.emplace(key, value).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate config key '" + key + "'");
    }
  }
  return out;
}

std::string SerializeCheckpoint(const ModelParams& params,
                                const TrainConfig& config) {
  internal::ByteWriter w;
  w.Bytes(std::string_view(kCheckpointMagic, 4));
  w.U32(kCheckpointVersion);
  TrainConfig stored = config;
  stored.model = params.config;
  w.String(FormatKeyValues(stored.ToKeyValues()));
  const auto refs = ParamRefs(params);
  w.U32(static_cast<std::uint32_t>(refs.size()));
  for (const ConstParamRef& ref : refs) w.TensorBlock(*ref.tensor);
  w.U64(params.num_prototypes());
  for (std::size_t c : params.proto_class) w.U32(static_cast<std::uint32_t>(c));
  for (bool pruned : params.prune_mask) w.U8(pruned ? 1 : 0);
  w.F64(params.similarity_epsilon());
  return w.bytes();
}

Checkpoint DeserializeCheckpoint(std::string_view bytes) {
  internal::ByteReader r(bytes);
  r.set_block("header");
  if (r.remaining() < 4) {
    throw Error(ErrorCode::kTruncated, "file ends inside the header block");
  }
  if (r.Bytes(4) != std::string_view(kCheckpointMagic, 4)) {
    throw Error(ErrorCode::kBadMagic, "not a checkpoint (expected magic EPPN)");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kBadVersion,
                "checkpoint version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  r.set_block("config");
  Checkpoint out;
  out.config.ApplyKeyValues(ParseKeyValues(r.String()));
  out.params = ZeroParams(out.config.model);

  r.set_block("tensor");
  auto refs = ParamRefs(out.params);
  const std::uint32_t count = r.U32();
  if (count != refs.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "checkpoint holds " + std::to_string(count) +
                    " tensors, model expects " + std::to_string(refs.size()));
  }
  for (ParamRef& ref : refs) {
    Tensor t = r.TensorBlock();
    CheckSameShape(t, *ref.tensor, "checkpoint tensor");
    *ref.tensor = std::move(t);
  }

  r.set_block("prototype class");
  const std::uint64_t m = r.U64();
  if (m != out.params.num_prototypes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "checkpoint prototype count disagrees with its config");
  }
  for (auto& c : out.params.proto_class) {
    c = r.U32();
    if (c >= out.params.num_classes()) {
      throw Error(ErrorCode::kInvalidArgument, "prototype class out of range");
    }
  }
  r.set_block("prune mask");
  for (std::size_t j = 0; j < m; ++j) out.params.prune_mask[j] = r.U8() != 0;
  r.set_block("epsilon");
  out.params.config.similarity_epsilon = r.F64();
  out.config.model = out.params.config;
  return out;
}

void SaveCheckpoint(const std::string& path, const ModelParams& params,
                    const TrainConfig& config) {
  internal::WriteFile(path, SerializeCheckpoint(params, config));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  return DeserializeCheckpoint(internal::ReadFile(path));
}

}  // namespace eppnet
