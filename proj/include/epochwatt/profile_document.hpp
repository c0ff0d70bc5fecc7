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

// Energy-profile interchange document (structured JSON, schema_version 1):
//
//   { "schema_version": 1, "model_name": "...", "region_code": "CA",
//     "pue": 1.1, "hardware": [{"catalog_key": "...", "quantity": 2}],
//     "epochs": [{"index": 0, "duration_s": 60.0, "energy_kwh": 0.0033}],
//     "created_at": "2026-01-01T00:00:00Z", "live": false }
//
// Keys not listed above are carried through import/export untouched, at the
// top level and inside each epoch.

#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "epochwatt/types.hpp"

namespace epochwatt {

nlohmann::json to_document(const EnergyProfile& profile);

/// Validates every field and invariant. Throws Error{validation_error} with
/// the JSON path of the first offending field in `detail`, or
/// Error{unsupported_version} for a schema_version other than 1.
EnergyProfile from_document(const nlohmann::json& document);

/// Parses text then applies from_document. Syntax errors are validation
/// errors too.
EnergyProfile parse_profile(std::string_view text);
std::string serialize_profile(const EnergyProfile& profile, int indent = 2);

nlohmann::json to_json(const HardwareSpec& spec);
HardwareSpec hardware_spec_from_json(const nlohmann::json& j,
                                     const std::string& path);

nlohmann::json to_json(const Counterfactual& cf);
Counterfactual counterfactual_from_json(const nlohmann::json& j,
                                        const std::string& path = "cf");

bool is_rfc3339(std::string_view text);
/// Current UTC wall-clock time, second resolution.
std::string now_rfc3339();

}  // namespace epochwatt
