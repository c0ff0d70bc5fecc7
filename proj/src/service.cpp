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

#include "epochwatt/service.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "epochwatt/error.hpp"
#include "epochwatt/profile_document.hpp"

namespace epochwatt {
namespace {

using nlohmann::json;

struct WindowEnergy {
  double joules = 0.0;
  std::size_t points = 0;
};

// Energy over [from, to] from whatever samples fall inside it. Device
// streams that start late or stop early (counter midpoints) are held flat
// out to the window edges.
WindowEnergy window_energy(const SampleSink& sink, double from, double to) {
  WindowEnergy out;
  if (!(to > from)) return out;
  const auto samples = sink.between(from, to);
  auto trace = aggregate_samples(samples);
  out.points = static_cast<std::size_t>(trace.time.size());
  if (trace.time.size() < 2) return out;
  if (trace.time(0) > from) {
    const Eigen::Index n = trace.time.size();
    Eigen::VectorXd t(n + 1), w(n + 1);
    t << from, trace.time;
    w << trace.watts(0), trace.watts;
    trace.time = std::move(t);
    trace.watts = std::move(w);
  }
  if (trace.time(trace.time.size() - 1) < to) {
    const Eigen::Index n = trace.time.size();
    trace.time.conservativeResize(n + 1);
    trace.watts.conservativeResize(n + 1);
    trace.time(n) = to;
    trace.watts(n) = trace.watts(n - 1);
  }
  out.joules = integrate_joules(trace);
  return out;
}

[[noreturn]] void invalid_state(const std::string& id, SessionState state,
                                const char* action) {
  throw Error(ErrorCode::invalid_state,
              std::string("cannot ") + action + " a " +
                  std::string(to_string(state)) + " session",
              id);
}

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::validation_error, path + ": " + why, path);
}

json number_or_null(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json breakdown_side(const EnergyProfile& profile,
                    const HardwareCatalog& hardware,
                    const IntensityTable& intensities) {
  std::optional<double> intensity;
  if (intensities.contains(profile.region_code)) {
    intensity = intensities.intensity(profile.region_code);
  }
  std::optional<HardwareTotals> totals;
  try {
    totals = hardware_totals(profile.hardware, hardware);
  } catch (const Error&) {
  }

  json side = {{"region_code", profile.region_code},
               {"intensity", number_or_null(intensity)},
               {"pue", profile.pue},
               {"hardware", json::array()},
               {"hardware_power_draw_w",
                number_or_null(totals ? std::optional(totals->power_draw)
                                      : std::nullopt)},
               {"hardware_flops",
                number_or_null(totals ? std::optional(totals->flops)
                                      : std::nullopt)},
               {"epochs", json::array()}};
  for (const auto& h : profile.hardware) side["hardware"].push_back(to_json(h));

  double total_kwh = 0.0, total_co2 = 0.0;
  for (const auto& e : profile.epochs) {
    const double average =
        e.duration_s > 0 ? kwh_to_joules(e.energy_kwh) / e.duration_s : 0.0;
    std::optional<double> co2;
    if (intensity) co2 = epoch_emissions(e.energy_kwh, *intensity);
    total_kwh += e.energy_kwh;
    if (co2) total_co2 += *co2;
    side["epochs"].push_back({{"index", e.index},
                              {"duration_s", e.duration_s},
                              {"energy_kwh", e.energy_kwh},
                              {"co2_lbs", number_or_null(co2)},
                              {"average_power_w", average},
                              {"device_power_w", average / profile.pue}});
  }
  side["total_kwh"] = total_kwh;
  side["total_co2_lbs"] = intensity ? json(total_co2) : json(nullptr);
  return side;
}

double get_number(const json& j, const std::string& key,
                  const std::string& path) {
  if (!j.contains(key)) bad_field(path + key, "missing required field");
  if (!j[key].is_number()) bad_field(path + key, "expected a number");
  return j[key].get<double>();
}

}  // namespace

std::string_view to_string(SessionState state) noexcept {
  switch (state) {
    case SessionState::running: return "running";
    case SessionState::paused: return "paused";
    case SessionState::halted: return "halted";
  }
  return "unknown";
}

struct TrackingService::Session {
  std::string id;
  mutable std::mutex mutex;
  EnergyProfile profile;
  SessionState state = SessionState::running;
  double epoch_started = 0.0;
  double active_started = 0.0;
  std::vector<std::pair<double, double>> closed_segments;
  bool epoch_paused = false;
  std::shared_ptr<SampleSink> sink = std::make_shared<SampleSink>();
  std::unique_ptr<SamplingLoop> sampler;
  std::ofstream journal;

  void write_journal(const json& line) {
    if (journal.is_open()) journal << line.dump() << '\n' << std::flush;
  }

  // Active segments of the open epoch, the current one ending at `end`.
  std::vector<std::pair<double, double>> segments(double end) const {
    auto all = closed_segments;
    if (state == SessionState::running) all.emplace_back(active_started, end);
    return all;
  }

  // Joules, active seconds and whether any segment had two or more samples.
  std::tuple<double, double, bool> measure(double end) const {
    double joules = 0.0, active = 0.0;
    bool integrated = false;
    for (const auto& [a, b] : segments(end)) {
      active += b - a;
      const auto w = window_energy(*sink, a, b);
      joules += w.joules;
      integrated = integrated || w.points >= 2;
    }
    return {joules, active, integrated};
  }

  EpochRecord close_epoch(double end) {
    const auto [joules, active, integrated] = measure(end);
    EpochRecord rec;
    rec.index = static_cast<int>(profile.epochs.size());
    rec.duration_s = active;
    rec.energy_kwh = integrated ? joules_to_kwh(profile.pue * joules) : 0.0;
    rec.degraded = !integrated;
    rec.paused = epoch_paused;
    profile.epochs.push_back(rec);
    write_journal({{"type", "epoch"}, {"epoch", to_json(rec)}});

    epoch_started = end;
    active_started = end;
    closed_segments.clear();
    epoch_paused = false;
    sink->discard_before(end);
    return rec;
  }
};

TrackingService::TrackingService(HardwareCatalog hardware,
                                 IntensityTable intensities,
                                 ServiceOptions options)
    : hardware_(std::move(hardware)),
      intensities_(std::move(intensities)),
      options_(std::move(options)),
      base_url_(options_.base_url) {
  if (!options_.clock) options_.clock = std::make_shared<SteadyClock>();
  if (options_.default_simulation) validate(*options_.default_simulation);
  if (options_.journal_dir) {
    std::filesystem::create_directories(*options_.journal_dir);
  }
}

TrackingService::~TrackingService() {
  std::unique_lock lock(mutex_);
  for (auto& [id, s] : sessions_) {
    std::lock_guard guard(s->mutex);
    if (s->sampler) s->sampler->stop();
  }
}

void TrackingService::set_base_url(std::string url) {
  std::unique_lock lock(mutex_);
  base_url_ = std::move(url);
}

std::string TrackingService::base_url() const {
  std::shared_lock lock(mutex_);
  return base_url_;
}

std::string TrackingService::new_id() {
  std::random_device rd;
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 4; ++i) {
    const std::uint32_t word = rd();
    out.width(8);
    out.fill('0');
    out << word;
  }
  return out.str();
}

std::vector<std::unique_ptr<PowerSource>> TrackingService::make_devices(
    const SessionRequest& request) const {
  if (options_.device_factory) return options_.device_factory(request);
  std::vector<std::unique_ptr<PowerSource>> devices;
  const auto& wave = request.simulate ? request.simulate
                                      : options_.default_simulation;
  if (wave) {
    devices.push_back(std::make_unique<SimulatedSource>("sim:0", *wave));
    return devices;
  }
  devices = discover_devices(options_.discovery);
  if (devices.empty()) {
    throw Error(ErrorCode::device_unsupported,
                "no power sources found on this host",
                options_.discovery.powercap_root.string(),
                {"pass --simulate to track a synthetic power waveform",
                 "check read access to the powercap energy counters"});
  }
  return devices;
}

SessionInfo TrackingService::start_session(const SessionRequest& request) {
  if (request.hardware.empty()) bad_field("hardware", "must not be empty");
  hardware_totals(request.hardware, hardware_);
  intensities_.intensity(request.region_code);
  if (!std::isfinite(request.pue) || request.pue < 1.0) {
    bad_field("pue", "must be >= 1");
  }

  auto s = std::make_shared<Session>();
  s->id = new_id();
  s->profile.model_name =
      request.model_name.empty() ? "unnamed" : request.model_name;
  s->profile.hardware = request.hardware;
  s->profile.region_code = request.region_code;
  std::transform(s->profile.region_code.begin(), s->profile.region_code.end(),
                 s->profile.region_code.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  s->profile.pue = request.pue;
  s->profile.created_at = now_rfc3339();
  s->profile.live = true;

  SamplerConfig config = options_.sampler;
  if (request.interval) config.interval = *request.interval;
  s->sampler = std::make_unique<SamplingLoop>(make_devices(request),
                                              options_.clock, config, s->sink,
                                              options_.log);
  if (options_.journal_dir) {
    s->journal.open(*options_.journal_dir / (s->id + ".jsonl"),
                    std::ios::app);
    auto header = to_document(s->profile);
    header.erase("epochs");
    s->write_journal({{"type", "session"}, {"id", s->id}, {"profile", header}});
  }
  const double t0 = s->sampler->start();
  s->epoch_started = t0;
  s->active_started = t0;

  std::unique_lock lock(mutex_);
  sessions_.emplace(s->id, s);
  return {s->id, base_url_ + "/sessions/" + s->id};
}

std::shared_ptr<TrackingService::Session> TrackingService::session(
    const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::not_found, "no such session", id);
  }
  return it->second;
}

EpochRecord TrackingService::mark_epoch(const std::string& id) {
  auto s = session(id);
  std::lock_guard lock(s->mutex);
  if (s->state != SessionState::running) {
    invalid_state(id, s->state, "mark an epoch on");
  }
  const double boundary = s->sampler->sample_now();
  return s->close_epoch(boundary);
}

LiveSnapshot TrackingService::live_profile(const std::string& id) const {
  auto s = session(id);
  std::lock_guard lock(s->mutex);
  LiveSnapshot snap;
  snap.id = id;
  snap.profile = s->profile;
  snap.state = s->state;
  snap.degraded_devices = s->sampler->degraded_devices();
  snap.sample_count = s->sink->count();
  if (s->state != SessionState::halted) {
    const auto samples = s->sink->snapshot();
    const double last =
        samples.empty() ? s->active_started : samples.back().timestamp;
    const auto [joules, active, integrated] =
        s->measure(std::max(last, s->active_started));
    OpenEpoch open;
    open.index = static_cast<int>(s->profile.epochs.size());
    open.started_at = s->epoch_started;
    open.elapsed_s = active;
    if (s->state == SessionState::running) {
      open.elapsed_s += std::max(0.0, options_.clock->now() - std::max(last, s->active_started));
    }
    open.energy_kwh = integrated ? joules_to_kwh(s->profile.pue * joules) : 0.0;
    open.samples = static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(),
        [&](const PowerSample& p) { return p.timestamp >= s->epoch_started; }));
    open.paused = s->epoch_paused || s->state == SessionState::paused;
    snap.open_epoch = open;
  }
  return snap;
}

SessionState TrackingService::pause_session(const std::string& id) {
  auto s = session(id);
  std::lock_guard lock(s->mutex);
  if (s->state != SessionState::running) invalid_state(id, s->state, "pause");
  const double t = s->sampler->pause();
  s->closed_segments.emplace_back(s->active_started, t);
  s->epoch_paused = true;
  s->state = SessionState::paused;
  s->write_journal({{"type", "pause"}, {"t", t}});
  return s->state;
}

SessionState TrackingService::resume_session(const std::string& id) {
  auto s = session(id);
  std::lock_guard lock(s->mutex);
  if (s->state != SessionState::paused) invalid_state(id, s->state, "resume");
  s->active_started = s->sampler->resume();
  s->state = SessionState::running;
  s->write_journal({{"type", "resume"}, {"t", s->active_started}});
  return s->state;
}

SessionState TrackingService::halt_session(const std::string& id,
                                           bool close_open_epoch) {
  auto s = session(id);
  std::lock_guard lock(s->mutex);
  if (s->state == SessionState::halted) invalid_state(id, s->state, "halt");
  const double end = s->state == SessionState::running
                         ? s->sampler->sample_now()
                         : s->active_started;
  const auto [joules, active, integrated] = s->measure(end);
  if (close_open_epoch && active > 0.0) {
    s->close_epoch(end);
  } else if (active > 0.0) {
    s->profile.extra["trailing_partial_epoch"] = {
        {"duration_s", active},
        {"energy_kwh",
         integrated ? joules_to_kwh(s->profile.pue * joules) : 0.0}};
  }
  s->sampler->stop();
  s->state = SessionState::halted;
  s->profile.live = false;
  s->write_journal({{"type", "halt"}, {"profile", to_document(s->profile)}});
  return s->state;
}

EnergyProfile TrackingService::export_profile(const std::string& id) const {
  {
    std::shared_lock lock(mutex_);
    if (const auto it = stored_.find(id); it != stored_.end()) {
      return it->second;
    }
  }
  return live_profile(id).profile;
}

std::string TrackingService::import_profile(const json& document) {
  return import_profile(from_document(document));
}

std::string TrackingService::import_profile(EnergyProfile profile) {
  auto id = new_id();
  std::unique_lock lock(mutex_);
  stored_.emplace(id, std::move(profile));
  return id;
}

std::vector<ProfileSummary> TrackingService::list_profiles() const {
  std::vector<ProfileSummary> out;
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, p] : stored_) {
      out.push_back({id, p.model_name, p.epochs.size(), p.live, "stored"});
    }
    for (const auto& [id, s] : sessions_) sessions.push_back(s);
  }
  for (const auto& s : sessions) {
    std::lock_guard lock(s->mutex);
    out.push_back({s->id, s->profile.model_name, s->profile.epochs.size(),
                   s->profile.live, "session"});
  }
  return out;
}

EnergyProfile TrackingService::resolve_profile(
    const std::optional<std::string>& id,
    const std::optional<EnergyProfile>& inline_doc, const char* field) const {
  if (inline_doc) return *inline_doc;
  if (!id) bad_field(field, "profile id or inline profile required");
  return export_profile(*id);
}

WhatIfResult TrackingService::what_if(const WhatIfRequest& request) const {
  if (request.horizon < 0) bad_field("horizon", "must be >= 0");
  const auto base =
      resolve_profile(request.profile_id, request.profile, "profile_id");

  WhatIfResult result;
  result.metric = request.metric;
  result.baseline = project(base, request.metric, intensities_, request.horizon);
  result.axis_length = result.baseline.length();

  std::optional<EnergyProfile> alt_profile;
  json factor = nullptr, pue_ratio = nullptr;
  if (request.counterfactual) {
    const auto& cf = *request.counterfactual;
    alt_profile = counterfactual_profile(base, cf, hardware_, intensities_);
    result.alternative =
        project(*alt_profile, request.metric, intensities_, request.horizon);
    result.axis_length =
        std::max(result.axis_length, result.alternative->length());
    if (cf.alt_hardware) {
      factor = hardware_rescale_factor(base.hardware, *cf.alt_hardware,
                                       hardware_);
    }
    if (cf.alt_pue) pue_ratio = *cf.alt_pue / base.pue;
  }
  if (request.overlay_id || request.overlay) {
    const auto overlay =
        resolve_profile(request.overlay_id, request.overlay, "overlay_profile_id");
    auto cmp = compare_profiles(base, overlay, request.metric, intensities_,
                                request.horizon);
    result.overlay = std::move(cmp.alternative);
    result.axis_length = std::max(result.axis_length, cmp.axis_length);
  }

  result.breakdown = {
      {"equations",
       {{"emissions", "co2_lbs = energy_kwh * intensity_lbs_per_kwh"},
        {"energy", "energy_kwh = integral(power_w dt) / 3.6e6"},
        {"power", "power_w = pue * sum(device_power_w)"}}},
      {"original", breakdown_side(base, hardware_, intensities_)},
      {"alternative", alt_profile ? breakdown_side(*alt_profile, hardware_,
                                                   intensities_)
                                  : json(nullptr)},
      {"hardware_factor", factor},
      {"pue_ratio", pue_ratio}};
  return result;
}

std::size_t TrackingService::recover_journal() {
  if (!options_.journal_dir) return 0;
  std::size_t recovered = 0;
  for (const auto& entry :
       std::filesystem::directory_iterator(*options_.journal_dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    const auto id = entry.path().stem().string();
    {
      std::shared_lock lock(mutex_);
      if (sessions_.count(id) || stored_.count(id)) continue;
    }
    std::ifstream in(entry.path());
    std::string line;
    json doc;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error&) {
        break;  // torn final write
      }
      const auto type = rec.value("type", "");
      if (type == "session") {
        doc = rec["profile"];
        doc["epochs"] = json::array();
      } else if (type == "epoch" && doc.is_object()) {
        doc["epochs"].push_back(rec["epoch"]);
      } else if (type == "halt" && rec.contains("profile")) {
        doc = rec["profile"];
      }
    }
    if (!doc.is_object()) continue;
    doc["live"] = false;
    try {
      auto profile = from_document(doc);
      std::unique_lock lock(mutex_);
      stored_.emplace(id, std::move(profile));
      ++recovered;
    } catch (const Error& e) {
      if (options_.log) options_.log("skipping journal " + id + ": " + e.what());
    }
  }
  return recovered;
}

// ---------------------------------------------------------------------------

json to_json(const ProjectionSeries& series) {
  json j = {{"metric", to_string(series.metric)},
            {"recorded", std::vector<double>(series.recorded.begin(),
                                             series.recorded.end())},
            {"extrapolated", std::vector<double>(series.extrapolated.begin(),
                                                 series.extrapolated.end())},
            {"clamped", series.clamped}};
  j["fit"] = series.fit ? json{{"slope", series.fit->slope},
                               {"intercept", series.fit->intercept}}
                        : json(nullptr);
  return j;
}

json to_json(const EpochRecord& epoch) {
  json j = epoch.extra.is_object() ? epoch.extra : json::object();
  j["index"] = epoch.index;
  j["duration_s"] = epoch.duration_s;
  j["energy_kwh"] = epoch.energy_kwh;
  if (epoch.degraded) j["degraded"] = true;
  if (epoch.paused) j["paused"] = true;
  return j;
}

json to_json(const LiveSnapshot& snapshot) {
  json doc = to_document(snapshot.profile);
  json extra = {{"id", snapshot.id},
                {"state", to_string(snapshot.state)},
                {"degraded_devices", snapshot.degraded_devices},
                {"sample_count", snapshot.sample_count}};
  if (snapshot.open_epoch) {
    const auto& o = *snapshot.open_epoch;
    extra["provisional"] = {{"index", o.index},
                            {"started_at", o.started_at},
                            {"elapsed_s", o.elapsed_s},
                            {"energy_kwh", o.energy_kwh},
                            {"samples", o.samples},
                            {"paused", o.paused}};
  } else {
    extra["provisional"] = nullptr;
  }
  doc["session"] = std::move(extra);
  return doc;
}

json to_json(const WhatIfResult& result) {
  return {{"metric", to_string(result.metric)},
          {"axis_length", result.axis_length},
          {"baseline", to_json(result.baseline)},
          {"alternative",
           result.alternative ? to_json(*result.alternative) : json(nullptr)},
          {"overlay", result.overlay ? to_json(*result.overlay) : json(nullptr)},
          {"breakdown", result.breakdown}};
}

json to_json(const ProfileSummary& s) {
  return {{"id", s.id},
          {"model_name", s.model_name},
          {"epochs", s.epochs},
          {"live", s.live},
          {"source", s.source}};
}

Waveform waveform_from_json(const json& j) {
  if (j.is_string()) return parse_waveform(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    bad_field("simulate.kind", "expected constant, ramp or sine");
  }
  const auto kind = j["kind"].get<std::string>();
  Waveform wave;
  if (kind == "constant") {
    wave = ConstantWave{get_number(j, "watts", "simulate.")};
  } else if (kind == "ramp") {
    wave = RampWave{get_number(j, "start_watts", "simulate."),
                    get_number(j, "end_watts", "simulate."),
                    get_number(j, "duration_s", "simulate.")};
  } else if (kind == "sine") {
    wave = SineWave{get_number(j, "mean", "simulate."),
                    get_number(j, "amplitude", "simulate."),
                    get_number(j, "period_s", "simulate.")};
  } else {
    bad_field("simulate.kind", "expected constant, ramp or sine");
  }
  validate(wave);
  return wave;
}

SessionRequest session_request_from_json(const json& body) {
  if (!body.is_object()) bad_field("$", "expected an object");
  SessionRequest r;
  if (body.contains("model_name")) {
    if (!body["model_name"].is_string()) bad_field("model_name", "expected a string");
    r.model_name = body["model_name"].get<std::string>();
  }
  if (!body.contains("hardware") || !body["hardware"].is_array()) {
    bad_field("hardware", "expected an array");
  }
  for (std::size_t i = 0; i < body["hardware"].size(); ++i) {
    r.hardware.push_back(hardware_spec_from_json(
        body["hardware"][i], "hardware[" + std::to_string(i) + "]"));
  }
  if (!body.contains("region_code") || !body["region_code"].is_string()) {
    bad_field("region_code", "expected a string");
  }
  r.region_code = body["region_code"].get<std::string>();
  if (body.contains("pue")) r.pue = get_number(body, "pue", "");
  if (body.contains("simulate") && !body["simulate"].is_null()) {
    r.simulate = waveform_from_json(body["simulate"]);
  }
  if (body.contains("interval")) r.interval = get_number(body, "interval", "");
  return r;
}

WhatIfRequest what_if_request_from_json(const json& body) {
  if (!body.is_object()) bad_field("$", "expected an object");
  WhatIfRequest r;
  const auto id_field = [&](const char* key) -> std::optional<std::string> {
    if (!body.contains(key) || body[key].is_null()) return std::nullopt;
    if (!body[key].is_string()) bad_field(key, "expected a string");
    return body[key].get<std::string>();
  };
  r.profile_id = id_field("profile_id");
  if (body.contains("profile") && !body["profile"].is_null()) {
    r.profile = from_document(body["profile"]);
  }
  if (!r.profile_id && !r.profile) {
    bad_field("profile_id", "profile_id or profile is required");
  }
  if (body.contains("counterfactual") && !body["counterfactual"].is_null()) {
    r.counterfactual =
        counterfactual_from_json(body["counterfactual"], "counterfactual");
  }
  r.overlay_id = id_field("overlay_profile_id");
  if (body.contains("overlay_profile") && !body["overlay_profile"].is_null()) {
    r.overlay = from_document(body["overlay_profile"]);
  }
  if (body.contains("metric")) {
    if (!body["metric"].is_string()) bad_field("metric", "expected a string");
    r.metric = parse_metric(body["metric"].get<std::string>());
  }
  if (body.contains("horizon")) {
    if (!body["horizon"].is_number_integer()) {
      bad_field("horizon", "expected an integer");
    }
    const auto h = body["horizon"].get<long long>();
    if (h < 0 || h > 100000) bad_field("horizon", "must be in [0, 100000]");
    r.horizon = static_cast<Eigen::Index>(h);
  }
  return r;
}

}  // namespace epochwatt
