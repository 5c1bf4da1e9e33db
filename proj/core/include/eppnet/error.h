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

#ifndef EPPNET_ERROR_H_
#define EPPNET_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace eppnet {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNotFinite,
  kEmptyInput,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kIo,
  kPlacementFailed,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported as Error. what() yields a single line of
// the form "<code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

  // Validation errors are caller mistakes (bad arguments, malformed files);
  // everything else is a runtime failure.
  bool IsValidationError() const;

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace eppnet

#endif  // EPPNET_ERROR_H_
