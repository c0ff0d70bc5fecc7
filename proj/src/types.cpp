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

#include <algorithm>
#include <cctype>
#include <string>

#include "epochwatt/error.hpp"
#include "epochwatt/types.hpp"

namespace epochwatt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::malformed_stream: return "malformed_stream";
    case ErrorCode::domain_error: return "domain_error";
    case ErrorCode::unknown_hardware: return "unknown_hardware";
    case ErrorCode::unknown_region: return "unknown_region";
    case ErrorCode::inconsistent_counter: return "inconsistent_counter";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::device_unsupported: return "device_unsupported";
    case ErrorCode::validation_error: return "validation_error";
    case ErrorCode::unsupported_version: return "unsupported_version";
    case ErrorCode::invalid_state: return "invalid_state";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::spawn_failure: return "spawn_failure";
  }
  return "unknown";
}

std::string_view to_string(DeviceKind kind) noexcept {
  return kind == DeviceKind::cpu ? "cpu" : "gpu";
}

std::string_view to_string(Metric metric) noexcept {
  return metric == Metric::kwh ? "kwh" : "co2_lbs";
}

Metric parse_metric(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "kwh") return Metric::kwh;
  if (lower == "co2" || lower == "co2_lbs") return Metric::co2_lbs;
  throw Error(ErrorCode::validation_error,
              "metric must be one of kwh, co2, co2_lbs", std::string(text));
}

}  // namespace epochwatt
