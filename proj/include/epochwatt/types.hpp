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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace epochwatt {

// Units: power in watts, time in seconds, internal energy in joules, stored
// energy in kWh, emissions in lbs CO2.
inline constexpr double kJoulesPerKwh = 3.6e6;
inline constexpr double kJoulesPerMicrojoule = 1e-6;
inline constexpr int kSchemaVersion = 1;

constexpr double joules_to_kwh(double joules) { return joules / kJoulesPerKwh; }
constexpr double kwh_to_joules(double kwh) { return kwh * kJoulesPerKwh; }

struct PowerSample {
  double timestamp = 0.0;  // monotonic seconds since session start
  std::string device_id;
  double power = 0.0;  // watts

  bool operator==(const PowerSample&) const = default;
};

struct HardwareSpec {
  std::string catalog_key;
  int quantity = 1;

  bool operator==(const HardwareSpec&) const = default;
};

enum class DeviceKind { cpu, gpu };

std::string_view to_string(DeviceKind kind) noexcept;

struct HardwareCatalogEntry {
  std::string name;
  DeviceKind kind = DeviceKind::gpu;
  double power_draw = 0.0;  // watts
  double flops = 0.0;       // peak floating-point ops per second

  bool operator==(const HardwareCatalogEntry&) const = default;
};

struct RegionIntensity {
  std::string region_code;
  double intensity = 0.0;  // lbs CO2 per kWh

  bool operator==(const RegionIntensity&) const = default;
};

struct EpochRecord {
  int index = 0;
  double duration_s = 0.0;
  double energy_kwh = 0.0;  // PUE already applied
  // Closed with fewer than two samples; energy is 0.
  bool degraded = false;
  // Contains at least one paused interval (excluded from duration/energy).
  bool paused = false;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const EpochRecord&) const = default;
};

struct EnergyProfile {
  int schema_version = kSchemaVersion;
  std::string model_name;
  std::vector<HardwareSpec> hardware;
  std::string region_code;
  double pue = 1.0;
  std::vector<EpochRecord> epochs;
  std::string created_at;  // RFC 3339
  bool live = false;
  // Top-level keys this version does not interpret; kept for round trips.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const EnergyProfile&) const = default;
};

struct Counterfactual {
  std::optional<std::string> alt_region;
  std::optional<std::vector<HardwareSpec>> alt_hardware;
  std::optional<double> alt_pue;

  bool empty() const noexcept {
    return !alt_region && !alt_hardware && !alt_pue;
  }
  bool operator==(const Counterfactual&) const = default;
};

enum class Metric { kwh, co2_lbs };

std::string_view to_string(Metric metric) noexcept;
/// Accepts "kwh", "co2", "co2_lbs" (case-insensitive).
Metric parse_metric(std::string_view text);

template <typename Scalar>
struct LinearFit {
  Scalar slope{};
  Scalar intercept{};

  Scalar operator()(Scalar x) const { return slope * x + intercept; }
};

struct ProjectionSeries {
  Metric metric = Metric::kwh;
  Eigen::VectorXd recorded;
  Eigen::VectorXd extrapolated;
  std::optional<LinearFit<double>> fit;
  // Positions in `extrapolated` whose raw prediction was negative.
  std::vector<Eigen::Index> clamped;

  Eigen::Index length() const noexcept {
    return recorded.size() + extrapolated.size();
  }
};

bool operator==(const ProjectionSeries& a, const ProjectionSeries& b);

}  // namespace epochwatt
