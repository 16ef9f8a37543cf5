// Copyright 2026 The grfsq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grfsq {

enum class ErrorCode {
  InvalidInput,
  InvalidCode,
  InvalidIndex,
  InvalidConfig,
  TooLarge,
  ConfigMismatch,
  DegenerateCalibration,
  CorruptStream,
  PredictorContractViolation,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidCode: return "InvalidCode";
    case ErrorCode::InvalidIndex: return "InvalidIndex";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::DegenerateCalibration: return "DegenerateCalibration";
    case ErrorCode::CorruptStream: return "CorruptStream";
    case ErrorCode::PredictorContractViolation: return "PredictorContractViolation";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace detail
}  // namespace grfsq
