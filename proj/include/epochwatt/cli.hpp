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

// The `epochwatt` command line: subcommand dispatch plus the renderers and
// the tracked-child runner, exposed separately so they can be tested.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epochwatt/catalog.hpp"
#include "epochwatt/sampling.hpp"
#include "epochwatt/types.hpp"

namespace epochwatt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSpawnFailure = 127;

inline constexpr const char* kSessionUrlEnv = "ENERGYVIS_SESSION_URL";

enum class Format { table, document };

/// Runs one invocation. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

/// "NAME" or "NAME:QTY" (the last colon followed by digits is the quantity).
HardwareSpec parse_hardware_flag(const std::string& flag);

struct ReportOptions {
  Metric metric = Metric::kwh;
  std::optional<std::string> region;  // overrides the profile's region
  Eigen::Index horizon = 0;
};

std::string render_report(const EnergyProfile& profile,
                          const ReportOptions& options,
                          const IntensityTable& intensities);
nlohmann::json report_document(const EnergyProfile& profile,
                               const ReportOptions& options,
                               const IntensityTable& intensities);

struct WhatIfOptions {
  Counterfactual counterfactual;
  Metric metric = Metric::kwh;
  Eigen::Index horizon = 0;
};

std::string render_whatif(const EnergyProfile& profile,
                          const WhatIfOptions& options,
                          const HardwareCatalog& hardware,
                          const IntensityTable& intensities);
nlohmann::json whatif_document(const EnergyProfile& profile,
                               const WhatIfOptions& options,
                               const HardwareCatalog& hardware,
                               const IntensityTable& intensities);

struct TrackOptions {
  std::vector<std::string> command;
  std::string model_name;
  std::vector<HardwareSpec> hardware;
  std::string region_code;
  double pue = 1.0;
  // Reuse a running service instead of starting one in-process.
  std::optional<std::string> service_url;
  std::optional<Waveform> simulate;
  double speed = 1.0;        // simulated clock speed-up (in-process only)
  double interval = 1.0;     // sampling interval, seconds
  std::optional<double> epoch_interval;  // timer-driven epoch marks
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> journal_dir;
  std::filesystem::path hardware_catalog;
  std::filesystem::path intensity_table;
};

struct TrackResult {
  int exit_code = 0;  // child's, or 128 + signal
  EnergyProfile profile;
};

/// Opens a session, runs the child with the session URL in its environment,
/// halts the session when the child exits and exports the profile. Throws
/// Error{spawn_failure} (after halting) when the child cannot be started.
TrackResult run_tracked(const TrackOptions& options, std::ostream& err);

/// Data files shipped with the build, overridable by EPOCHWATT_DATA_DIR.
std::filesystem::path default_data_dir();

}  // namespace epochwatt::cli
