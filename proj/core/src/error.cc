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

#include "eppnet/error.h"

namespace eppnet {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kShapeMismatch:
      return "shape_mismatch";
    case ErrorCode::kNotFinite:
      return "not_finite";
    case ErrorCode::kEmptyInput:
      return "empty_input";
    case ErrorCode::kBadMagic:
      return "bad_magic";
    case ErrorCode::kBadVersion:
      return "bad_version";
    case ErrorCode::kTruncated:
      return "truncation";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kPlacementFailed:
      return "placement_failed";
  }
  return "unknown";
}

namespace {

std::string FormatMessage(ErrorCode code, const std::string& detail) {
  std::string line = std::string(ErrorCodeName(code)) + ": " + detail;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return line;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(FormatMessage(code, detail)),
      code_(code),
      detail_(detail) {}

bool Error::IsValidationError() const {
  switch (code_) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kTruncated:
      return true;
    default:
      return false;
  }
}

}  // namespace eppnet
