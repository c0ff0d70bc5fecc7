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

#include "epochwatt/sampling.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "csv.hpp"
#include "epochwatt/error.hpp"

extern char** environ;

namespace epochwatt {
namespace {

std::uint64_t read_counter_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::uint64_t value = 0;
  if (!(in >> value)) {
    throw Error(ErrorCode::device_unsupported, "cannot read energy counter",
                path.string());
  }
  return value;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double require_param(std::string_view field, std::string_view spec) {
  const auto value = detail::parse_double(field);
  if (!value) {
    throw Error(ErrorCode::parse_error, "invalid waveform parameter",
                std::string(spec));
  }
  return *value;
}

}  // namespace

std::uint64_t cpu_energy_delta_uj(const CounterSnapshot& prev,
                                  const CounterSnapshot& curr) {
  if (prev.max_range_uj != curr.max_range_uj || curr.max_range_uj == 0) {
    throw Error(ErrorCode::inconsistent_counter,
                "counter snapshots disagree on the wraparound range",
                std::to_string(prev.max_range_uj) + " vs " +
                    std::to_string(curr.max_range_uj));
  }
  if (prev.raw_energy_uj >= prev.max_range_uj ||
      curr.raw_energy_uj >= curr.max_range_uj) {
    throw Error(ErrorCode::inconsistent_counter,
                "counter value outside its range",
                std::to_string(curr.raw_energy_uj));
  }
  if (curr.timestamp < prev.timestamp) {
    throw Error(ErrorCode::domain_error, "counter snapshots out of order");
  }
  if (curr.raw_energy_uj >= prev.raw_energy_uj) {
    return curr.raw_energy_uj - prev.raw_energy_uj;
  }
  return (curr.max_range_uj - prev.raw_energy_uj) + curr.raw_energy_uj;
}

double cpu_energy_delta(const CounterSnapshot& prev,
                        const CounterSnapshot& curr) {
  return static_cast<double>(cpu_energy_delta_uj(prev, curr)) *
         kJoulesPerMicrojoule;
}

double counter_to_power(double delta_joules, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::domain_error, "interval must be positive",
                std::to_string(dt));
  }
  if (!(delta_joules >= 0.0) || !std::isfinite(delta_joules)) {
    throw Error(ErrorCode::domain_error, "energy delta must be non-negative",
                std::to_string(delta_joules));
  }
  return delta_joules / dt;
}

PowerSample counter_sample(const CounterSnapshot& prev,
                           const CounterSnapshot& curr, std::string device_id) {
  const double joules = cpu_energy_delta(prev, curr);
  const double dt = curr.timestamp - prev.timestamp;
  return {prev.timestamp + 0.5 * dt, std::move(device_id),
          counter_to_power(joules, dt)};
}

double parse_gpu_power(std::string_view telemetry_line) {
  const auto fields = split(telemetry_line, ',');
  auto field = detail::trim(fields.back());
  if (field == "N/A" || field == "[N/A]" || field == "[Not Supported]" ||
      field == "Not Supported") {
    throw Error(ErrorCode::device_unsupported,
                "device does not report power draw",
                std::string(telemetry_line));
  }
  if (field.size() > 1 && (field.back() == 'W' || field.back() == 'w')) {
    field.remove_suffix(1);
    field = detail::trim(field);
  }
  const auto value = detail::parse_double(field);
  if (!value || *value < 0.0) {
    throw Error(ErrorCode::parse_error, "unrecognized power reading",
                std::string(telemetry_line));
  }
  return *value;
}

double evaluate(const Waveform& wave, double t) {
  const double v = std::visit(
      [t](const auto& w) -> double {
        using W = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<W, ConstantWave>) {
          return w.watts;
        } else if constexpr (std::is_same_v<W, RampWave>) {
          if (t <= 0.0) return w.start_watts;
          if (t >= w.duration_s) return w.end_watts;
          return w.start_watts + (w.end_watts - w.start_watts) * (t / w.duration_s);
        } else {
          return w.mean + w.amplitude * std::sin(2.0 * std::numbers::pi * t /
                                                 w.period_s);
        }
      },
      wave);
  return std::max(0.0, v);
}

void validate(const Waveform& wave) {
  const auto bad = [](const char* what) {
    throw Error(ErrorCode::domain_error, "invalid waveform", what);
  };
  std::visit(
      [&](const auto& w) {
        using W = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<W, ConstantWave>) {
          if (!std::isfinite(w.watts) || w.watts < 0) bad("constant watts");
        } else if constexpr (std::is_same_v<W, RampWave>) {
          if (!std::isfinite(w.start_watts) || !std::isfinite(w.end_watts) ||
              w.start_watts < 0 || w.end_watts < 0) {
            bad("ramp endpoints");
          }
          if (!std::isfinite(w.duration_s) || w.duration_s <= 0) {
            bad("ramp duration");
          }
        } else {
          if (!std::isfinite(w.mean) || !std::isfinite(w.amplitude) ||
              w.mean < std::abs(w.amplitude)) {
            bad("sine must satisfy mean >= |amplitude|");
          }
          if (!std::isfinite(w.period_s) || w.period_s <= 0) bad("sine period");
        }
      },
      wave);
}

Waveform parse_waveform(std::string_view spec) {
  const auto parts = split(spec, ':');
  const auto& kind = parts.front();
  Waveform wave;
  if (kind == "constant" && parts.size() == 2) {
    wave = ConstantWave{require_param(parts[1], spec)};
  } else if (kind == "ramp" && parts.size() == 4) {
    wave = RampWave{require_param(parts[1], spec), require_param(parts[2], spec),
                    require_param(parts[3], spec)};
  } else if ((kind == "sine" || kind == "sinusoid") && parts.size() == 4) {
    wave = SineWave{require_param(parts[1], spec), require_param(parts[2], spec),
                    require_param(parts[3], spec)};
  } else {
    throw Error(ErrorCode::parse_error,
                "waveform must be constant:W, ramp:START:END:SECONDS or "
                "sine:MEAN:AMPLITUDE:PERIOD",
                std::string(spec));
  }
  validate(wave);
  return wave;
}

std::vector<PowerSample> simulated_samples(const Waveform& wave,
                                           const std::string& device_id,
                                           double interval, std::size_t count,
                                           double t0) {
  validate(wave);
  if (!(interval > 0.0)) {
    throw Error(ErrorCode::domain_error, "interval must be positive");
  }
  std::vector<PowerSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = t0 + static_cast<double>(i) * interval;
    out.push_back({t, device_id, evaluate(wave, t)});
  }
  return out;
}

SimulatedSource::SimulatedSource(std::string id, Waveform wave)
    : id_(std::move(id)), wave_(wave) {
  validate(wave_);
}

std::optional<PowerSample> SimulatedSource::read(double t) {
  return PowerSample{t, id_, evaluate(wave_, t)};
}

RaplSource::RaplSource(std::string id, std::filesystem::path domain_dir)
    : id_(std::move(id)), dir_(std::move(domain_dir)) {}

CounterSnapshot RaplSource::snapshot(double t) const {
  return {read_counter_file(dir_ / "energy_uj"),
          read_counter_file(dir_ / "max_energy_range_uj"), t};
}

std::optional<PowerSample> RaplSource::read(double t) {
  const auto snap = snapshot(t);
  if (!prev_ || snap.timestamp <= prev_->timestamp) {
    if (!prev_) prev_ = snap;
    return std::nullopt;
  }
  auto sample = counter_sample(*prev_, snap, id_);
  prev_ = snap;
  return sample;
}

GpuQuerySource::GpuQuerySource(std::string id, std::string tool, int index)
    : id_(std::move(id)), tool_(std::move(tool)), index_(index) {}

std::optional<PowerSample> GpuQuerySource::read(double t) {
  const auto out = capture_output({tool_, "--query-gpu=power.draw",
                                   "--format=csv,noheader", "-i",
                                   std::to_string(index_)});
  if (!out) {
    throw Error(ErrorCode::device_unsupported, "GPU query tool failed", id_);
  }
  const auto lines = detail::csv_lines(*out);
  if (lines.empty()) {
    throw Error(ErrorCode::parse_error, "GPU query tool printed nothing", id_);
  }
  return PowerSample{t, id_, parse_gpu_power(lines.front().second)};
}

std::optional<std::string> capture_output(
    const std::vector<std::string>& argv) {
  if (argv.empty()) return std::nullopt;
  int fds[2];
  if (pipe2(fds, O_CLOEXEC) != 0) return std::nullopt;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null",
                                   O_WRONLY, 0);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc =
      posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(fds[1]);
  if (rc != 0) {
    close(fds[0]);
    return std::nullopt;
  }
  std::string out;
  char buf[4096];
  ssize_t n = 0;
  while ((n = ::read(fds[0], buf, sizeof(buf))) > 0) out.append(buf, n);
  close(fds[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return std::nullopt;
  return out;
}

std::vector<std::unique_ptr<PowerSource>> discover_devices(
    const DiscoveryConfig& config) {
  std::vector<std::unique_ptr<PowerSource>> devices;

  std::error_code ec;
  std::vector<std::filesystem::path> domains;
  for (const auto& entry :
       std::filesystem::directory_iterator(config.powercap_root, ec)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("intel-rapl:", 0) != 0 ||
        std::count(name.begin(), name.end(), ':') != 1) {
      continue;
    }
    if (!std::filesystem::exists(entry.path() / "energy_uj") ||
        !std::filesystem::exists(entry.path() / "max_energy_range_uj")) {
      continue;
    }
    domains.push_back(entry.path());
  }
  std::sort(domains.begin(), domains.end());
  for (const auto& dir : domains) {
    std::string label = dir.filename().string();
    std::ifstream name_file(dir / "name");
    std::string domain_name;
    if (name_file >> domain_name) {
      if (domain_name == "psys") continue;
      label = domain_name + "@" + label;
    }
    try {
      read_counter_file(dir / "energy_uj");
    } catch (const Error&) {
      continue;  // unreadable without privileges
    }
    devices.push_back(std::make_unique<RaplSource>("rapl:" + label, dir));
  }

  if (const auto out = capture_output({config.gpu_query_tool,
                                       "--query-gpu=power.draw",
                                       "--format=csv,noheader"})) {
    const auto lines = detail::csv_lines(*out);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      devices.push_back(std::make_unique<GpuQuerySource>(
          "gpu:" + std::to_string(i), config.gpu_query_tool,
          static_cast<int>(i)));
    }
  }
  return devices;
}

// ---------------------------------------------------------------------------

void SampleSink::append(std::span<const PowerSample> samples) {
  std::lock_guard lock(mutex_);
  samples_.insert(samples_.end(), samples.begin(), samples.end());
}

std::size_t SampleSink::size() const {
  std::lock_guard lock(mutex_);
  return samples_.size();
}

std::size_t SampleSink::count() const {
  std::lock_guard lock(mutex_);
  return samples_.size() + discarded_;
}

std::vector<PowerSample> SampleSink::snapshot() const {
  std::lock_guard lock(mutex_);
  return samples_;
}

std::vector<PowerSample> SampleSink::between(double from, double to) const {
  std::lock_guard lock(mutex_);
  std::vector<PowerSample> out;
  for (const auto& s : samples_) {
    if (s.timestamp >= from && s.timestamp <= to) out.push_back(s);
  }
  return out;
}

void SampleSink::discard_before(double t) {
  std::lock_guard lock(mutex_);
  const auto keep = std::find_if(samples_.begin(), samples_.end(),
                                 [t](const auto& s) { return s.timestamp >= t; });
  discarded_ += static_cast<std::size_t>(keep - samples_.begin());
  samples_.erase(samples_.begin(), keep);
}

SamplingLoop::SamplingLoop(std::vector<std::unique_ptr<PowerSource>> devices,
                           std::shared_ptr<Clock> clock, SamplerConfig config,
                           std::shared_ptr<SampleSink> sink, LogFn log)
    : devices_(std::move(devices)),
      clock_(std::move(clock)),
      config_(config),
      sink_(std::move(sink)),
      log_(std::move(log)) {
  if (!(config_.interval >= 0.1) || !std::isfinite(config_.interval)) {
    throw Error(ErrorCode::domain_error, "sampling interval must be >= 0.1 s",
                std::to_string(config_.interval));
  }
  if (devices_.empty()) {
    throw Error(ErrorCode::device_unsupported, "no power sources available");
  }
  if (!log_) {
    log_ = [](std::string_view msg) { std::clog << "epochwatt: " << msg << '\n'; };
  }
}

SamplingLoop::~SamplingLoop() { stop(); }

double SamplingLoop::start() {
  {
    std::lock_guard lock(mutex_);
    if (started_) return origin_;
    started_ = true;
    origin_ = clock_->now();
    emit_locked(origin_);
    ticks_ = 1;
  }
  thread_ = std::jthread([this](std::stop_token st) { run(st); });
  return origin_;
}

void SamplingLoop::run(std::stop_token stop) {
  while (!stop.stop_requested()) {
    double target = 0.0;
    {
      std::unique_lock lock(mutex_);
      resume_cv_.wait(lock, stop, [&] { return !paused_; });
      if (stop.stop_requested()) break;
      target = origin_ + static_cast<double>(ticks_) * config_.interval;
    }
    if (!clock_->wait_until(target, stop)) break;
    std::lock_guard lock(mutex_);
    tick_through_locked(clock_->now());
  }
}

void SamplingLoop::tick_through_locked(double now) {
  if (stopped_ || paused_ || !started_) return;
  while (true) {
    const double t = origin_ + static_cast<double>(ticks_) * config_.interval;
    if (t > now) break;
    if (!emitted_ || t > last_emit_) emit_locked(t);
    ++ticks_;
  }
}

void SamplingLoop::emit_locked(double t) {
  std::vector<PowerSample> batch;
  batch.reserve(devices_.size());
  for (auto& device : devices_) {
    try {
      if (auto sample = device->read(t)) batch.push_back(std::move(*sample));
    } catch (const std::exception& e) {
      if (degraded_.insert(device->id()).second) {
        log_("device " + device->id() + " degraded: " + e.what());
      }
      batch.push_back({t, device->id(), 0.0});
    }
  }
  sink_->append(batch);
  last_emit_ = t;
  emitted_ = true;
}

double SamplingLoop::sample_now() {
  std::lock_guard lock(mutex_);
  if (stopped_ || paused_ || !started_) return last_emit_;
  const double now = clock_->now();
  tick_through_locked(now);
  if (now > last_emit_) emit_locked(now);
  return now;
}

double SamplingLoop::pause() {
  std::lock_guard lock(mutex_);
  if (stopped_ || paused_ || !started_) return last_emit_;
  const double now = clock_->now();
  tick_through_locked(now);
  if (now > last_emit_) emit_locked(now);
  paused_ = true;
  return now;
}

double SamplingLoop::resume() {
  double now = 0.0;
  {
    std::lock_guard lock(mutex_);
    if (stopped_ || !paused_) return last_emit_;
    now = clock_->now();
    paused_ = false;
    origin_ = now;
    ticks_ = 0;
    if (now > last_emit_) emit_locked(now);
    ticks_ = 1;
  }
  resume_cv_.notify_all();
  return now;
}

void SamplingLoop::stop() {
  if (thread_.joinable()) {
    thread_.request_stop();
    resume_cv_.notify_all();
    thread_.join();
  }
  std::lock_guard lock(mutex_);
  stopped_ = true;
}

bool SamplingLoop::running() const {
  std::lock_guard lock(mutex_);
  return started_ && !stopped_ && !paused_;
}

bool SamplingLoop::paused() const {
  std::lock_guard lock(mutex_);
  return paused_;
}

std::vector<std::string> SamplingLoop::degraded_devices() const {
  std::lock_guard lock(mutex_);
  return {degraded_.begin(), degraded_.end()};
}

}  // namespace epochwatt
