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

// Live tracking sessions and the what-if engine behind the HTTP API.
//
// Each session owns a sampling loop writing into its own sink. Mutations of
// one session (epoch marks, pause/resume/halt) are serialized by that
// session's mutex; reads take a consistent copy. Nothing here touches
// another session's state.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epochwatt/catalog.hpp"
#include "epochwatt/clock.hpp"
#include "epochwatt/emission.hpp"
#include "epochwatt/sampling.hpp"
#include "epochwatt/types.hpp"

namespace epochwatt {

enum class SessionState { running, paused, halted };
std::string_view to_string(SessionState state) noexcept;

struct SessionRequest {
  std::string model_name;
  std::vector<HardwareSpec> hardware;
  std::string region_code;
  double pue = 1.0;
  // Simulated power for this session instead of the service default.
  std::optional<Waveform> simulate;
  std::optional<double> interval;
};

struct SessionInfo {
  std::string id;
  std::string url;
};

/// Running totals for the epoch that has not been marked yet.
struct OpenEpoch {
  int index = 0;
  double started_at = 0.0;
  double elapsed_s = 0.0;  // paused time excluded
  double energy_kwh = 0.0;
  std::size_t samples = 0;
  bool paused = false;
};

struct LiveSnapshot {
  std::string id;
  EnergyProfile profile;  // closed epochs only
  SessionState state = SessionState::running;
  std::optional<OpenEpoch> open_epoch;
  std::vector<std::string> degraded_devices;
  std::size_t sample_count = 0;
};

struct ProfileSummary {
  std::string id;
  std::string model_name;
  std::size_t epochs = 0;
  bool live = false;
  std::string source;  // "session" or "stored"
};

struct WhatIfRequest {
  std::optional<std::string> profile_id;
  std::optional<EnergyProfile> profile;
  std::optional<Counterfactual> counterfactual;
  std::optional<std::string> overlay_id;
  std::optional<EnergyProfile> overlay;
  Metric metric = Metric::kwh;
  Eigen::Index horizon = 0;
};

struct WhatIfResult {
  Metric metric = Metric::kwh;
  Eigen::Index axis_length = 0;
  ProjectionSeries baseline;
  std::optional<ProjectionSeries> alternative;
  std::optional<ProjectionSeries> overlay;
  nlohmann::json breakdown;
};

struct ServiceOptions {
  std::shared_ptr<Clock> clock;  // defaults to SteadyClock
  SamplerConfig sampler;
  DiscoveryConfig discovery;
  // When set, every session without its own waveform is simulated.
  std::optional<Waveform> default_simulation;
  // Overrides device creation entirely (tests, embedding).
  std::function<std::vector<std::unique_ptr<PowerSource>>(const SessionRequest&)>
      device_factory;
  // One JSON-lines file per session, one line per closed epoch.
  std::optional<std::filesystem::path> journal_dir;
  std::string base_url = "http://127.0.0.1:8765";
  LogFn log;
};

class TrackingService {
 public:
  TrackingService(HardwareCatalog hardware, IntensityTable intensities,
                  ServiceOptions options = {});
  ~TrackingService();

  TrackingService(const TrackingService&) = delete;
  TrackingService& operator=(const TrackingService&) = delete;

  SessionInfo start_session(const SessionRequest& request);
  EpochRecord mark_epoch(const std::string& id);
  LiveSnapshot live_profile(const std::string& id) const;
  SessionState pause_session(const std::string& id);
  SessionState resume_session(const std::string& id);
  /// Stops sampling for good. Energy after the last mark is reported under
  /// the profile's "trailing_partial_epoch" key unless `close_open_epoch`
  /// turns it into a final epoch.
  SessionState halt_session(const std::string& id,
                            bool close_open_epoch = false);

  /// Session (live or halted) or stored profile by id.
  EnergyProfile export_profile(const std::string& id) const;
  std::string import_profile(const nlohmann::json& document);
  std::string import_profile(EnergyProfile profile);
  std::vector<ProfileSummary> list_profiles() const;

  WhatIfResult what_if(const WhatIfRequest& request) const;

  /// Reloads journaled sessions as stored, non-live profiles.
  std::size_t recover_journal();

  const HardwareCatalog& hardware() const noexcept { return hardware_; }
  const IntensityTable& intensities() const noexcept { return intensities_; }
  const Clock& clock() const noexcept { return *options_.clock; }
  void set_base_url(std::string url);
  std::string base_url() const;

 private:
  struct Session;

  std::shared_ptr<Session> session(const std::string& id) const;
  EnergyProfile resolve_profile(const std::optional<std::string>& id,
                                const std::optional<EnergyProfile>& inline_doc,
                                const char* field) const;
  std::vector<std::unique_ptr<PowerSource>> make_devices(
      const SessionRequest& request) const;
  static std::string new_id();

  HardwareCatalog hardware_;
  IntensityTable intensities_;
  ServiceOptions options_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, EnergyProfile> stored_;
  std::string base_url_;
};

// JSON encodings used by the HTTP API.
nlohmann::json to_json(const ProjectionSeries& series);
nlohmann::json to_json(const LiveSnapshot& snapshot);
nlohmann::json to_json(const WhatIfResult& result);
nlohmann::json to_json(const EpochRecord& epoch);
nlohmann::json to_json(const ProfileSummary& summary);
SessionRequest session_request_from_json(const nlohmann::json& body);
WhatIfRequest what_if_request_from_json(const nlohmann::json& body);
Waveform waveform_from_json(const nlohmann::json& j);

}  // namespace epochwatt
