// Copyright 2026 The epochwatt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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
#include <vector>

namespace epochwatt {

enum class ErrorCode {
  insufficient_data,
  malformed_stream,
  domain_error,
  unknown_hardware,
  unknown_region,
  inconsistent_counter,
  parse_error,
  device_unsupported,
  validation_error,
  unsupported_version,
  invalid_state,
  not_found,
  spawn_failure,
};

/// Stable snake_case name used in service error bodies.
std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library. `detail` carries the offending
/// input (field path, row number, raw text) and `suggestions` lists close
/// catalog names for unknown-hardware / unknown-region failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string detail = {},
        std::vector<std::string> suggestions = {})
      : std::runtime_error(std::move(message)),
        code_(code),
        detail_(std::move(detail)),
        suggestions_(std::move(suggestions)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::vector<std::string>& suggestions() const noexcept {
    return suggestions_;
  }

 private:
  ErrorCode code_;
  std::string detail_;
  std::vector<std::string> suggestions_;
};

}  // namespace epochwatt
