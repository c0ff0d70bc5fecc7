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

// Power acquisition: CPU energy counters (powercap), GPU telemetry via the
// vendor query tool, and deterministic simulated waveforms, all feeding one
// PowerSample stream.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "epochwatt/clock.hpp"
#include "epochwatt/types.hpp"

namespace epochwatt {

// ---------------------------------------------------------------------------
// Energy counters

struct CounterSnapshot {
  std::uint64_t raw_energy_uj = 0;  // cumulative, wraps at max_range_uj
  std::uint64_t max_range_uj = 0;
  double timestamp = 0.0;
};

/// (curr - prev) mod max_range in microjoules, exact.
std::uint64_t cpu_energy_delta_uj(const CounterSnapshot& prev,
                                  const CounterSnapshot& curr);
/// Same, in joules.
double cpu_energy_delta(const CounterSnapshot& prev,
                        const CounterSnapshot& curr);

/// Average power over an interval. Throws domain_error for dt <= 0.
double counter_to_power(double delta_joules, double dt);

/// Average power between two snapshots, stamped at the interval midpoint.
PowerSample counter_sample(const CounterSnapshot& prev,
                           const CounterSnapshot& curr, std::string device_id);

// ---------------------------------------------------------------------------
// GPU telemetry

/// One line of `--query-gpu=power.draw --format=csv,noheader` output, e.g.
/// "87.50 W". With several comma-separated fields the last one is the power
/// draw. "N/A" style sentinels throw device_unsupported; anything else that
/// is not a non-negative number throws parse_error with the raw text.
double parse_gpu_power(std::string_view telemetry_line);

// ---------------------------------------------------------------------------
// Simulated waveforms

struct ConstantWave {
  double watts = 0.0;
};
/// Linear from start to end over duration_s, then held at end_watts.
struct RampWave {
  double start_watts = 0.0;
  double end_watts = 0.0;
  double duration_s = 1.0;
};
/// mean + amplitude * sin(2*pi*t / period_s).
struct SineWave {
  double mean = 0.0;
  double amplitude = 0.0;
  double period_s = 1.0;
};
using Waveform = std::variant<ConstantWave, RampWave, SineWave>;

/// Watts at time t; never negative.
double evaluate(const Waveform& wave, double t);

/// Throws domain_error for non-finite parameters, a waveform that can go
/// negative, or a non-positive ramp duration / period.
void validate(const Waveform& wave);

/// "constant:200", "ramp:0:100:10", "sine:50:50:60".
Waveform parse_waveform(std::string_view spec);

/// `count` samples at t0, t0 + interval, ...
std::vector<PowerSample> simulated_samples(const Waveform& wave,
                                           const std::string& device_id,
                                           double interval, std::size_t count,
                                           double t0 = 0.0);

// ---------------------------------------------------------------------------
// Devices

class PowerSource {
 public:
  virtual ~PowerSource() = default;
  virtual const std::string& id() const = 0;
  /// Reading taken at session time t. May return nullopt while priming
  /// (counters need two snapshots). Throws on device failure.
  virtual std::optional<PowerSample> read(double t) = 0;
};

class SimulatedSource final : public PowerSource {
 public:
  SimulatedSource(std::string id, Waveform wave);
  const std::string& id() const override { return id_; }
  std::optional<PowerSample> read(double t) override;

 private:
  std::string id_;
  Waveform wave_;
};

/// One powercap domain directory (energy_uj, max_energy_range_uj).
class RaplSource final : public PowerSource {
 public:
  RaplSource(std::string id, std::filesystem::path domain_dir);
  const std::string& id() const override { return id_; }
  std::optional<PowerSample> read(double t) override;

  CounterSnapshot snapshot(double t) const;

 private:
  std::string id_;
  std::filesystem::path dir_;
  std::optional<CounterSnapshot> prev_;
};

/// One GPU queried through the vendor tool as a subprocess.
class GpuQuerySource final : public PowerSource {
 public:
  GpuQuerySource(std::string id, std::string tool, int index);
  const std::string& id() const override { return id_; }
  std::optional<PowerSample> read(double t) override;

 private:
  std::string id_;
  std::string tool_;
  int index_;
};

struct DiscoveryConfig {
  std::filesystem::path powercap_root = "/sys/class/powercap";
  std::string gpu_query_tool = "nvidia-smi";
};

/// Top-level powercap domains (packages; psys skipped since it contains
/// them) plus every GPU the query tool reports. Missing hardware yields an
/// empty list rather than an error.
std::vector<std::unique_ptr<PowerSource>> discover_devices(
    const DiscoveryConfig& config);

/// Runs argv (no shell) and returns its stdout; nullopt if it could not be
/// started or exited non-zero.
std::optional<std::string> capture_output(const std::vector<std::string>& argv);

// ---------------------------------------------------------------------------
// Sampling loop

/// Append-only, thread-safe sample stream for one session. Readers always
/// see a prefix of what the writer appended.
class SampleSink {
 public:
  void append(std::span<const PowerSample> samples);
  std::size_t size() const;
  std::vector<PowerSample> snapshot() const;
  /// Samples with from <= timestamp <= to.
  std::vector<PowerSample> between(double from, double to) const;
  /// Drops samples older than t; count() keeps counting them.
  void discard_before(double t);
  /// Total samples ever appended.
  std::size_t count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<PowerSample> samples_;
  std::size_t discarded_ = 0;
};

struct SamplerConfig {
  double interval = 1.0;  // seconds, >= 0.1
};

using LogFn = std::function<void(std::string_view)>;

/// Polls every device once per interval on a background thread and appends
/// to the sink. Ticks land on origin + k * interval. Boundary samples can be
/// forced synchronously so epoch windows share their endpoint sample.
class SamplingLoop {
 public:
  SamplingLoop(std::vector<std::unique_ptr<PowerSource>> devices,
               std::shared_ptr<Clock> clock, SamplerConfig config,
               std::shared_ptr<SampleSink> sink, LogFn log = {});
  ~SamplingLoop();

  SamplingLoop(const SamplingLoop&) = delete;
  SamplingLoop& operator=(const SamplingLoop&) = delete;

  /// Takes the first sample at clock.now() and launches the thread.
  double start();
  /// Catches up on due ticks and samples at clock.now() if that is later
  /// than the last sample. Returns the boundary timestamp.
  double sample_now();
  /// Samples at now and suspends ticking. Returns the pause timestamp.
  double pause();
  /// Samples at now and restarts the tick schedule from there.
  double resume();
  /// Stops the thread and waits for it. No sample is appended afterwards.
  void stop();

  bool running() const;
  bool paused() const;
  std::vector<std::string> degraded_devices() const;
  const Clock& clock() const { return *clock_; }
  std::size_t device_count() const { return devices_.size(); }

 private:
  void run(std::stop_token stop);
  void tick_through_locked(double now);
  void emit_locked(double t);

  std::vector<std::unique_ptr<PowerSource>> devices_;
  std::shared_ptr<Clock> clock_;
  SamplerConfig config_;
  std::shared_ptr<SampleSink> sink_;
  LogFn log_;

  mutable std::mutex mutex_;
  std::condition_variable_any resume_cv_;
  double origin_ = 0.0;
  std::int64_t ticks_ = 0;
  double last_emit_ = -1.0;
  bool emitted_ = false;
  bool paused_ = false;
  bool stopped_ = false;
  bool started_ = false;
  std::set<std::string> degraded_;
  std::jthread thread_;
};

}  // namespace epochwatt
