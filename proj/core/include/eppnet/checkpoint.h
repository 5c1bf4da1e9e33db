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

// Model checkpoint file (".eppn"). All integers and doubles little-endian:
//
//   char[4]  magic "EPPN"
//   u32      format version (1)
//   u64 n, n bytes   training configuration as "key=value\n" lines, sorted
//                    by key; includes the model geometry
//   u32      tensor count T
//   T x tensor       u32 rank, u64 extents[rank], f64 values[volume], in
//                    ParamRefs order
//   u64      prototype count M
//   M x u32  prototype -> class
//   M x u8   prune mask (1 = pruned)
//   f64      similarity epsilon

#ifndef EPPNET_CHECKPOINT_H_
#define EPPNET_CHECKPOINT_H_

#include <string>
#include <string_view>

#include "eppnet/model.h"
#include "eppnet/train_config.h"

namespace eppnet {

inline constexpr char kCheckpointMagic[4] = {'E', 'P', 'P', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
};

std::string SerializeCheckpoint(const ModelParams& params,
                                const TrainConfig& config);
Checkpoint DeserializeCheckpoint(std::string_view bytes);

void SaveCheckpoint(const std::string& path, const ModelParams& params,
                    const TrainConfig& config);
Checkpoint LoadCheckpoint(const std::string& path);

// "key=value\n" lines in key order.
std::string FormatKeyValues(const std::map<std::string, std::string>& values);
// Parses "key=value" lines; blank lines and '#' comments are skipped,
// whitespace around keys and values trimmed. Duplicate keys throw.
std::map<std::string, std::string> ParseKeyValues(std::string_view text);

}  // namespace eppnet

#endif  // EPPNET_CHECKPOINT_H_
