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

#include "epochwatt/cli.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "epochwatt/emission.hpp"
#include "epochwatt/error.hpp"
#include "epochwatt/http_api.hpp"
#include "epochwatt/profile_document.hpp"
#include "epochwatt/service.hpp"

extern char** environ;

namespace epochwatt::cli {
namespace {

using nlohmann::json;

std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string strf(const char* fmt, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, fmt);
  const int n = std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (n < static_cast<int>(sizeof buf)) return std::string(buf, n > 0 ? n : 0);
  std::string big(static_cast<std::size_t>(n) + 1, '\0');
  va_start(ap, fmt);
  std::vsnprintf(big.data(), big.size(), fmt, ap);
  va_end(ap);
  big.resize(static_cast<std::size_t>(n));
  return big;
}

std::string num(double v) { return strf("%.6g", v); }

std::string pct(double base, double alt) {
  if (base == 0.0) return alt == 0.0 ? "+0.00%" : "n/a";
  return strf("%+.2f%%", 100.0 * (alt - base) / base);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string hardware_label(const std::vector<HardwareSpec>& hw) {
  std::string out;
  for (const auto& h : hw) {
    if (!out.empty()) out += ", ";
    out += std::to_string(h.quantity) + " x " + h.catalog_key;
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::validation_error, "cannot read file", path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EnergyProfile load_profile(const std::filesystem::path& path) {
  return parse_profile(read_text(path));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw Error(ErrorCode::validation_error, "cannot write file", path.string());
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportRow {
  Eigen::Index index = 0;
  std::optional<double> duration;
  double kwh = 0.0;
  std::optional<double> co2;
  bool predicted = false;
};

struct ReportData {
  std::string region;
  std::optional<double> intensity;
  std::vector<ReportRow> rows;
  Eigen::Index recorded = 0;
  double duration = 0.0;
  double kwh_recorded = 0.0, kwh_all = 0.0;
  std::optional<double> co2_recorded, co2_all;
  std::vector<Eigen::Index> clamped;
};

ReportData compute_report(const EnergyProfile& profile,
                          const ReportOptions& options,
                          const IntensityTable& intensities) {
  ReportData d;
  d.region = upper(options.region.value_or(profile.region_code));
  if (options.region || options.metric == Metric::co2_lbs ||
      intensities.contains(d.region)) {
    d.intensity = intensities.intensity(d.region);
  }
  const auto series = project(profile, Metric::kwh, intensities, options.horizon);
  d.recorded = series.recorded.size();
  d.clamped = series.clamped;
  double co2_rec = 0.0, co2_all = 0.0;
  for (Eigen::Index i = 0; i < series.length(); ++i) {
    ReportRow r;
    r.index = i;
    r.predicted = i >= d.recorded;
    r.kwh = r.predicted ? series.extrapolated(i - d.recorded) : series.recorded(i);
    if (!r.predicted) {
      r.duration = profile.epochs[static_cast<std::size_t>(i)].duration_s;
      d.duration += *r.duration;
    }
    if (d.intensity) {
      r.co2 = epoch_emissions(r.kwh, *d.intensity);
      if (!r.predicted) co2_rec += *r.co2;
      co2_all += *r.co2;
    }
    d.rows.push_back(r);
  }
  d.kwh_recorded = series.recorded.sum();
  d.kwh_all = d.kwh_recorded + series.extrapolated.sum();
  if (d.intensity) {
    d.co2_recorded = co2_rec;
    d.co2_all = co2_all;
  }
  return d;
}

std::string opt_num(const std::optional<double>& v) {
  return v ? num(*v) : std::string("n/a");
}

}  // namespace

std::string render_report(const EnergyProfile& profile,
                          const ReportOptions& options,
                          const IntensityTable& intensities) {
  const auto d = compute_report(profile, options, intensities);
  const auto predicted = static_cast<Eigen::Index>(d.rows.size()) - d.recorded;
  std::string out;
  out += strf("model      %s\n", profile.model_name.c_str());
  std::string region = d.region;
  if (d.intensity) region += " (" + num(*d.intensity) + " lbs CO2/kWh)";
  if (options.region && upper(*options.region) != upper(profile.region_code)) {
    region += ", override of " + profile.region_code;
  }
  out += strf("region     %s\n", region.c_str());
  out += strf("pue        %s\n", num(profile.pue).c_str());
  out += strf("hardware   %s\n", hardware_label(profile.hardware).c_str());
  out += "\n";
  const char* rule = "------  ----------  ------------  ------------\n";
  out += " epoch  duration_s    energy_kwh       co2_lbs\n";
  out += rule;
  for (const auto& r : d.rows) {
    out += strf("%5lld%c  %10s  %12s  %12s\n", static_cast<long long>(r.index),
                r.predicted ? '*' : ' ',
                r.duration ? strf("%.3f", *r.duration).c_str() : "-",
                num(r.kwh).c_str(), opt_num(r.co2).c_str());
  }
  out += rule;
  out += strf(" total  %10.3f  %12s  %12s\n", d.duration,
              num(d.kwh_recorded).c_str(), opt_num(d.co2_recorded).c_str());
  if (predicted > 0) {
    out += strf("total*  %10s  %12s  %12s\n", "-", num(d.kwh_all).c_str(),
                opt_num(d.co2_all).c_str());
    out += "\n* predicted by a least-squares trend over recorded epochs";
    if (!d.clamped.empty()) out += " (negative values shown as 0)";
    out += "\n";
  }
  const bool co2 = options.metric == Metric::co2_lbs;
  const auto rec = co2 ? opt_num(d.co2_recorded) : num(d.kwh_recorded);
  const char* unit = co2 ? "lbs CO2" : "kWh";
  out += strf("\nsummary: %s %s over %lld recorded epochs", rec.c_str(), unit,
              static_cast<long long>(d.recorded));
  if (predicted > 0) {
    const auto all = co2 ? opt_num(d.co2_all) : num(d.kwh_all);
    out += strf(", %s %s including %lld predicted", all.c_str(), unit,
                static_cast<long long>(predicted));
  }
  out += "\n";
  return out;
}

json report_document(const EnergyProfile& profile, const ReportOptions& options,
                     const IntensityTable& intensities) {
  const auto d = compute_report(profile, options, intensities);
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json rows = json::array();
  for (const auto& r : d.rows) {
    rows.push_back({{"index", r.index},
                    {"duration_s", opt(r.duration)},
                    {"energy_kwh", r.kwh},
                    {"co2_lbs", opt(r.co2)},
                    {"predicted", r.predicted}});
  }
  return {{"model_name", profile.model_name},
          {"metric", to_string(options.metric)},
          {"region_code", d.region},
          {"intensity", opt(d.intensity)},
          {"rows", rows},
          {"clamped", d.clamped},
          {"totals",
           {{"recorded",
             {{"duration_s", d.duration},
              {"energy_kwh", d.kwh_recorded},
              {"co2_lbs", opt(d.co2_recorded)}}},
            {"with_predicted",
             {{"energy_kwh", d.kwh_all}, {"co2_lbs", opt(d.co2_all)}}}}}};
}

// ---------------------------------------------------------------------------
// whatif

namespace {

struct Side {
  EnergyProfile profile;
  std::optional<double> intensity;
  ProjectionSeries kwh;
  double kwh_total = 0.0;
  std::optional<double> co2_total;
};

Side make_side(EnergyProfile p, Eigen::Index horizon,
               const IntensityTable& intensities) {
  Side s;
  s.kwh = project(p, Metric::kwh, intensities, horizon);
  s.kwh_total = s.kwh.recorded.sum() + s.kwh.extrapolated.sum();
  if (intensities.contains(p.region_code)) {
    s.intensity = intensities.intensity(p.region_code);
    const auto co2 = project(p, Metric::co2_lbs, intensities, horizon);
    s.co2_total = co2.recorded.sum() + co2.extrapolated.sum();
  }
  s.profile = std::move(p);
  return s;
}

std::pair<Side, Side> whatif_sides(const EnergyProfile& profile,
                                   const WhatIfOptions& o,
                                   const HardwareCatalog& hardware,
                                   const IntensityTable& intensities) {
  auto alt = counterfactual_profile(profile, o.counterfactual, hardware,
                                    intensities);
  if (o.metric == Metric::co2_lbs) {
    intensities.intensity(profile.region_code);
  }
  return {make_side(profile, o.horizon, intensities),
          make_side(std::move(alt), o.horizon, intensities)};
}

}  // namespace

std::string render_whatif(const EnergyProfile& profile,
                          const WhatIfOptions& options,
                          const HardwareCatalog& hardware,
                          const IntensityTable& intensities) {
  const auto [base, alt] = whatif_sides(profile, options, hardware, intensities);
  const auto& cf = options.counterfactual;
  std::string out;
  const auto line = [&out](const char* label, const std::string& a,
                           const std::string& b, const std::string& delta) {
    out += strf("%-20s  %-22s  %-22s  %s\n", label, a.c_str(), b.c_str(),
                delta.c_str());
    while (out.size() > 1 && out[out.size() - 2] == ' ') {
      out.erase(out.size() - 2, 1);
    }
  };
  out += strf("model      %s\n", profile.model_name.c_str());
  out += strf("epochs     %zu recorded", profile.epochs.size());
  if (options.horizon > 0) {
    out += strf(", %lld predicted", static_cast<long long>(options.horizon));
  }
  out += "\n\n";
  line("", "baseline", "alternative", "delta");
  line("region", base.profile.region_code, alt.profile.region_code, "");
  line("intensity_lbs_kwh", opt_num(base.intensity), opt_num(alt.intensity), "");
  line("pue", num(base.profile.pue), num(alt.profile.pue), "");
  line("hardware", hardware_label(base.profile.hardware),
       hardware_label(alt.profile.hardware), "");
  if (cf.alt_hardware) {
    line("hardware_factor", "",
         num(hardware_rescale_factor(profile.hardware, *cf.alt_hardware, hardware)),
         "");
  }
  line("energy_kwh", num(base.kwh_total), num(alt.kwh_total),
       pct(base.kwh_total, alt.kwh_total));
  line("co2_lbs", opt_num(base.co2_total), opt_num(alt.co2_total),
       base.co2_total && alt.co2_total ? pct(*base.co2_total, *alt.co2_total)
                                       : "n/a");
  const bool co2 = options.metric == Metric::co2_lbs;
  const std::string b = co2 ? opt_num(base.co2_total) : num(base.kwh_total);
  const std::string a = co2 ? opt_num(alt.co2_total) : num(alt.kwh_total);
  const std::string d = co2 ? (base.co2_total && alt.co2_total
                                   ? pct(*base.co2_total, *alt.co2_total)
                                   : "n/a")
                            : pct(base.kwh_total, alt.kwh_total);
  out += strf("\nsummary: %s %s -> %s (%s)\n", co2 ? "co2_lbs" : "energy_kwh",
              b.c_str(), a.c_str(), d.c_str());
  return out;
}

json whatif_document(const EnergyProfile& profile, const WhatIfOptions& options,
                     const HardwareCatalog& hardware,
                     const IntensityTable& intensities) {
  const auto [base, alt] = whatif_sides(profile, options, hardware, intensities);
  const auto side = [](const Side& s) {
    json hw = json::array();
    for (const auto& h : s.profile.hardware) hw.push_back(to_json(h));
    return json{{"region_code", s.profile.region_code},
                {"intensity", s.intensity ? json(*s.intensity) : json(nullptr)},
                {"pue", s.profile.pue},
                {"hardware", hw},
                {"energy_kwh", to_json(s.kwh)},
                {"total_kwh", s.kwh_total},
                {"total_co2_lbs", s.co2_total ? json(*s.co2_total) : json(nullptr)}};
  };
  json doc = {{"model_name", profile.model_name},
              {"metric", to_string(options.metric)},
              {"horizon", options.horizon},
              {"counterfactual", to_json(options.counterfactual)},
              {"baseline", side(base)},
              {"alternative", side(alt)}};
  if (options.counterfactual.alt_hardware) {
    doc["hardware_factor"] = hardware_rescale_factor(
        profile.hardware, *options.counterfactual.alt_hardware, hardware);
  }
  return doc;
}

// ---------------------------------------------------------------------------
// track

namespace {

json waveform_json(const Waveform& wave) {
  return std::visit(
      [](const auto& w) -> json {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, ConstantWave>) {
          return {{"kind", "constant"}, {"watts", w.watts}};
        } else if constexpr (std::is_same_v<T, RampWave>) {
          return {{"kind", "ramp"},
                  {"start_watts", w.start_watts},
                  {"end_watts", w.end_watts},
                  {"duration_s", w.duration_s}};
        } else {
          return {{"kind", "sine"},
                  {"mean", w.mean},
                  {"amplitude", w.amplitude},
                  {"period_s", w.period_s}};
        }
      },
      wave);
}

std::shared_ptr<Clock> make_clock(double speed) {
  if (!(speed > 0.0) || !std::isfinite(speed)) {
    throw Error(ErrorCode::validation_error, "--speed must be positive",
                std::to_string(speed));
  }
  if (speed == 1.0) return std::make_shared<SteadyClock>();
  return std::make_shared<ScaledClock>(speed);
}

LogFn locked_log(std::ostream& err) {
  auto m = std::make_shared<std::mutex>();
  return [&err, m](std::string_view msg) {
    std::lock_guard lock(*m);
    err << "epochwatt: " << msg << '\n' << std::flush;
  };
}

// Restores the previous dispositions when destroyed.
class IgnoreTerminalSignals {
 public:
  IgnoreTerminalSignals() {
    struct sigaction ign {};
    ign.sa_handler = SIG_IGN;
    for (std::size_t i = 0; i < kSignals.size(); ++i) {
      sigaction(kSignals[i], &ign, &saved_[i]);
    }
  }
  ~IgnoreTerminalSignals() {
    for (std::size_t i = 0; i < kSignals.size(); ++i) {
      sigaction(kSignals[i], &saved_[i], nullptr);
    }
  }

 private:
  static constexpr std::array<int, 3> kSignals{SIGINT, SIGTERM, SIGQUIT};
  std::array<struct sigaction, 3> saved_{};
};

int spawn_child(const std::vector<std::string>& command,
                const std::string& session_url, pid_t& pid) {
  std::vector<std::string> env_store;
  const std::string prefix = std::string(kSessionUrlEnv) + "=";
  for (char** e = environ; e && *e; ++e) {
    if (std::strncmp(*e, prefix.c_str(), prefix.size()) != 0) {
      env_store.emplace_back(*e);
    }
  }
  env_store.push_back(prefix + session_url);
  std::vector<char*> envp;
  for (auto& s : env_store) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::vector<std::string> args = command;
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t defaults, empty;
  sigemptyset(&defaults);
  for (int sig : {SIGINT, SIGTERM, SIGQUIT, SIGPIPE}) sigaddset(&defaults, sig);
  sigemptyset(&empty);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK);
  const int rc =
      posix_spawnp(&pid, argv[0], nullptr, &attr, argv.data(), envp.data());
  posix_spawnattr_destroy(&attr);
  return rc;
}

}  // namespace

TrackResult run_tracked(const TrackOptions& o, std::ostream& err) {
  if (o.command.empty()) {
    throw Error(ErrorCode::validation_error, "no command given after --");
  }
  const auto log = locked_log(err);
  std::shared_ptr<Clock> clock;
  std::unique_ptr<TrackingService> service;
  std::unique_ptr<HttpServer> http;
  std::string base;
  if (o.service_url) {
    base = *o.service_url;
    clock = std::make_shared<SteadyClock>();
    if (o.speed != 1.0) log("--speed is ignored with an external service");
  } else {
    clock = make_clock(o.speed);
    ServiceOptions so;
    so.clock = clock;
    so.sampler.interval = o.interval;
    so.journal_dir = o.journal_dir;
    so.log = log;
    service = std::make_unique<TrackingService>(
        load_hardware_catalog_file(o.hardware_catalog),
        load_intensity_table_file(o.intensity_table), std::move(so));
    HttpOptions ho;
    ho.port = 0;
    ho.log = log;
    http = std::make_unique<HttpServer>(*service, ho);
    http->start();
    base = http->url();
  }

  ServiceClient client(base);
  json hw = json::array();
  for (const auto& h : o.hardware) hw.push_back(to_json(h));
  json request = {{"model_name", o.model_name.empty()
                                     ? std::filesystem::path(o.command[0])
                                           .filename()
                                           .string()
                                     : o.model_name},
                  {"hardware", hw},
                  {"region_code", o.region_code},
                  {"pue", o.pue},
                  {"interval", o.interval}};
  if (o.simulate) request["simulate"] = waveform_json(*o.simulate);
  const auto created = ServiceClient::expect_ok(client.post("/sessions", request));
  const std::string id = created["id"];
  const std::string url = created["url"];
  log("session " + url);

  const auto halt = [&] {
    ServiceClient::expect_ok(client.post("/sessions/" + id + "/halt"));
    return from_document(
        ServiceClient::expect_ok(client.get("/profiles/" + id + "/export")));
  };

  TrackResult result;
  {
    IgnoreTerminalSignals guard;
    pid_t pid = 0;
    if (const int rc = spawn_child(o.command, url, pid); rc != 0) {
      halt();
      throw Error(ErrorCode::spawn_failure, "could not start command",
                  o.command[0] + ": " + std::strerror(rc));
    }

    std::jthread timer;
    if (o.epoch_interval) {
      const double every = *o.epoch_interval;
      timer = std::jthread([&, every](std::stop_token stop) {
        ServiceClient marker(base);
        double next = clock->now() + every;
        while (clock->wait_until(next, stop)) {
          try {
            const auto r = ServiceClient::expect_ok(
                marker.post("/sessions/" + id + "/epoch"));
            log(strf("epoch %d closed", r["epoch"]["index"].get<int>()));
          } catch (const Error& e) {
            log(std::string("epoch mark failed: ") + e.what());
          }
          next += every;
        }
      });
    }

    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
      if (errno != EINTR) {
        status = 0;
        break;
      }
    }
    if (timer.joinable()) {
      timer.request_stop();
      timer.join();
    }
    if (WIFEXITED(status)) {
      result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
      result.exit_code = 128 + WTERMSIG(status);
    }
  }
  result.profile = halt();
  if (o.output) write_text(*o.output, serialize_profile(result.profile) + "\n");
  double total = 0.0;
  for (const auto& e : result.profile.epochs) total += e.energy_kwh;
  log(strf("child exited with %d; %zu epochs, %s kWh", result.exit_code,
           result.profile.epochs.size(), num(total).c_str()));
  return result;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("EPOCHWATT_DATA_DIR"); env && *env) {
    return env;
  }
#ifdef EPOCHWATT_DATA_DIR
  return EPOCHWATT_DATA_DIR;
#else
  return "data";
#endif
}

HardwareSpec parse_hardware_flag(const std::string& flag) {
  HardwareSpec spec;
  spec.catalog_key = flag;
  const auto colon = flag.rfind(':');
  if (colon != std::string::npos && colon + 1 < flag.size() &&
      flag.find_first_not_of("0123456789", colon + 1) == std::string::npos) {
    spec.catalog_key = flag.substr(0, colon);
    const auto q = std::stoll(flag.substr(colon + 1));
    if (q < 1 || q > 1000000) {
      throw Error(ErrorCode::validation_error, "hardware quantity must be >= 1",
                  flag);
    }
    spec.quantity = static_cast<int>(q);
  }
  if (spec.catalog_key.empty()) {
    throw Error(ErrorCode::validation_error, "empty hardware name", flag);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// dispatch

namespace {

struct Globals {
  std::string service_url = "http://127.0.0.1:8765";
  std::string format = "table";
  std::string hardware_catalog;
  std::string intensity_table;

  Format fmt() const { return format == "document" ? Format::document : Format::table; }
  std::filesystem::path hw_path() const {
    return hardware_catalog.empty() ? default_data_dir() / "hardware.csv"
                                    : std::filesystem::path(hardware_catalog);
  }
  std::filesystem::path intensity_path() const {
    return intensity_table.empty() ? default_data_dir() / "intensity_us.csv"
                                   : std::filesystem::path(intensity_table);
  }
  HardwareCatalog hardware() const { return load_hardware_catalog_file(hw_path()); }
  IntensityTable intensities() const {
    return load_intensity_table_file(intensity_path());
  }
};

void print_error(std::ostream& err, const Error& e) {
  err << "error: " << e.what();
  if (!e.detail().empty()) err << ": " << e.detail();
  err << '\n';
  if (!e.suggestions().empty()) {
    err << (e.code() == ErrorCode::unknown_hardware ||
                    e.code() == ErrorCode::unknown_region
                ? "did you mean:"
                : "hint:");
    for (const auto& s : e.suggestions()) err << "\n  " << s;
    err << '\n';
  }
}

Waveform waveform_flag(const std::string& spec) { return parse_waveform(spec); }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Per-epoch energy and CO2 tracking for long-running workloads",
               "epochwatt"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--service-url", g.service_url, "Tracking service base URL")
      ->capture_default_str();
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"table", "document"}))
      ->capture_default_str();
  app.add_option("--hardware-catalog", g.hardware_catalog,
                 "Hardware CSV (name,kind,power_draw_w,flops)");
  app.add_option("--intensity-table", g.intensity_table,
                 "Intensity CSV (region_code,intensity_lbs_per_kwh)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the tracking service");
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string serve_sim, journal, static_dir;
  double speed = 1.0, interval = 1.0;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--simulate", serve_sim,
                    "Simulated power for every session, e.g. constant:200");
  serve->add_option("--speed", speed, "Simulated clock speed-up")->capture_default_str();
  serve->add_option("--interval", interval, "Sampling interval in seconds")
      ->capture_default_str();
  serve->add_option("--journal", journal, "Directory for session journals");
  serve->add_option("--static-dir", static_dir, "Web UI assets served at /");

  // track
  auto* track = app.add_subcommand("track", "Track a child command");
  TrackOptions to;
  std::vector<std::string> track_hw;
  std::string track_sim, track_out, track_journal;
  double epoch_interval = 0.0;
  track->add_option("--model", to.model_name, "Model name (default: command)");
  track->add_option("--hardware", track_hw, "NAME[:QTY], repeatable")->required();
  track->add_option("--region", to.region_code, "Region code")->required();
  track->add_option("--pue", to.pue)->capture_default_str();
  track->add_option("--simulate", track_sim, "Simulated power waveform");
  track->add_option("--speed", to.speed)->capture_default_str();
  track->add_option("--interval", to.interval)->capture_default_str();
  track->add_option("--epoch-interval", epoch_interval,
                    "Mark an epoch every N seconds");
  track->add_option("--journal", track_journal);
  track->add_option("-o,--output", track_out, "Write the profile document here");
  track->add_option("command", to.command, "Command and arguments after --")
      ->required();

  // report
  auto* report = app.add_subcommand("report", "Per-epoch table of a profile");
  std::string profile_path, metric = "kwh", region;
  long long horizon = 0;
  report->add_option("profile", profile_path)->required();
  report->add_option("--metric", metric)->capture_default_str();
  report->add_option("--region", region, "Region override for CO2");
  report->add_option("--horizon", horizon, "Epochs to extrapolate")
      ->check(CLI::NonNegativeNumber);

  // whatif
  auto* whatif = app.add_subcommand("whatif", "Compare a profile under a counterfactual");
  std::vector<std::string> alt_hw;
  double alt_pue = 0.0;
  whatif->add_option("profile", profile_path)->required();
  whatif->add_option("--region", region, "Alternative region");
  whatif->add_option("--hardware", alt_hw, "Alternative NAME[:QTY], repeatable");
  whatif->add_option("--pue", alt_pue, "Alternative PUE");
  whatif->add_option("--metric", metric)->capture_default_str();
  whatif->add_option("--horizon", horizon)->check(CLI::NonNegativeNumber);

  // import / export
  auto* import = app.add_subcommand("import", "Upload a profile document");
  import->add_option("profile", profile_path)->required();
  auto* exporter = app.add_subcommand("export", "Download a profile document");
  std::string export_id, export_out;
  exporter->add_option("id", export_id)->required();
  exporter->add_option("-o,--output", export_out);

  // catalog
  auto* catalog = app.add_subcommand("catalog", "List catalog data");
  std::string table = "hardware", query;
  catalog->add_option("table", table)
      ->check(CLI::IsMember({"hardware", "intensity"}))
      ->capture_default_str();
  catalog->add_option("query", query, "Substring filter for hardware");

  // mark
  auto* mark = app.add_subcommand(
      "mark", std::string("Close the current epoch of the session in ") +
                  kSessionUrlEnv);
  std::string session_url;
  mark->add_option("--session-url", session_url);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*serve) {
      ServiceOptions so;
      so.clock = make_clock(speed);
      so.sampler.interval = interval;
      if (!serve_sim.empty()) so.default_simulation = waveform_flag(serve_sim);
      if (!journal.empty()) so.journal_dir = journal;
      so.log = locked_log(err);
      TrackingService service(g.hardware(), g.intensities(), so);
      if (so.journal_dir) {
        const auto n = service.recover_journal();
        if (n > 0) so.log(strf("recovered %zu journaled profile(s)", n));
      }
      HttpOptions ho;
      ho.host = host;
      ho.port = port;
      if (!static_dir.empty()) ho.static_dir = static_dir;
      ho.log = so.log;
      if (host != "127.0.0.1" && host != "localhost" && host != "::1") {
        so.log("warning: listening beyond loopback; session URLs are the only "
               "access control");
      }
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      HttpServer http(service, ho);
      http.start();
      out << "epochwatt: serving on " << http.url() << '\n' << std::flush;
      int sig = 0;
      sigwait(&set, &sig);
      http.stop();
      pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
      return kExitOk;
    }

    if (*track) {
      for (const auto& h : track_hw) to.hardware.push_back(parse_hardware_flag(h));
      if (!track_sim.empty()) to.simulate = waveform_flag(track_sim);
      if (epoch_interval > 0.0) to.epoch_interval = epoch_interval;
      if (!track_out.empty()) to.output = track_out;
      if (!track_journal.empty()) to.journal_dir = track_journal;
      if (app.count("--service-url") > 0) to.service_url = g.service_url;
      to.hardware_catalog = g.hw_path();
      to.intensity_table = g.intensity_path();
      try {
        const auto result = run_tracked(to, err);
        if (!to.output && g.fmt() == Format::document) {
          err << serialize_profile(result.profile) << '\n';
        }
        return result.exit_code;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::spawn_failure) throw;
        print_error(err, e);
        return kExitSpawnFailure;
      }
    }

    if (*report) {
      const auto profile = load_profile(profile_path);
      ReportOptions ro;
      ro.metric = parse_metric(metric);
      if (!region.empty()) ro.region = region;
      ro.horizon = horizon;
      const auto intensities = g.intensities();
      if (g.fmt() == Format::document) {
        out << report_document(profile, ro, intensities).dump(2) << '\n';
      } else {
        out << render_report(profile, ro, intensities);
      }
      return kExitOk;
    }

    if (*whatif) {
      WhatIfOptions wo;
      if (!region.empty()) wo.counterfactual.alt_region = upper(region);
      if (!alt_hw.empty()) {
        wo.counterfactual.alt_hardware.emplace();
        for (const auto& h : alt_hw) {
          wo.counterfactual.alt_hardware->push_back(parse_hardware_flag(h));
        }
      }
      if (whatif->count("--pue") > 0) wo.counterfactual.alt_pue = alt_pue;
      if (wo.counterfactual.empty()) {
        err << "error: whatif needs at least one of --region, --hardware, --pue\n";
        return kExitUsage;
      }
      wo.metric = parse_metric(metric);
      wo.horizon = horizon;
      const auto profile = load_profile(profile_path);
      const auto hw = g.hardware();
      const auto intensities = g.intensities();
      if (g.fmt() == Format::document) {
        out << whatif_document(profile, wo, hw, intensities).dump(2) << '\n';
      } else {
        out << render_whatif(profile, wo, hw, intensities);
      }
      return kExitOk;
    }

    if (*import) {
      const auto profile = load_profile(profile_path);
      ServiceClient client(g.service_url);
      const auto r = ServiceClient::expect_ok(
          client.post("/profiles", to_document(profile)));
      if (g.fmt() == Format::document) {
        out << r.dump() << '\n';
      } else {
        out << r["id"].get<std::string>() << '\n';
      }
      return kExitOk;
    }

    if (*exporter) {
      ServiceClient client(g.service_url);
      const auto profile = from_document(ServiceClient::expect_ok(
          client.get("/profiles/" + export_id + "/export")));
      if (!export_out.empty()) {
        write_text(export_out, serialize_profile(profile) + "\n");
      } else if (g.fmt() == Format::table) {
        out << render_report(profile, {}, g.intensities());
      } else {
        out << serialize_profile(profile) << '\n';
      }
      return kExitOk;
    }

    if (*catalog) {
      if (table == "hardware") {
        const auto hw = g.hardware();
        const auto q = canonical_name(query);
        json doc = json::array();
        std::string text = strf("%-40s  %-4s  %12s  %12s\n", "name", "kind",
                                "power_draw_w", "flops");
        for (const auto& e : hw.entries()) {
          if (!q.empty() && canonical_name(e.name).find(q) == std::string::npos) {
            continue;
          }
          doc.push_back({{"name", e.name},
                         {"kind", to_string(e.kind)},
                         {"power_draw_w", e.power_draw},
                         {"flops", e.flops}});
          text += strf("%-40s  %-4s  %12s  %12s\n", e.name.c_str(),
                       std::string(to_string(e.kind)).c_str(),
                       num(e.power_draw).c_str(), num(e.flops).c_str());
        }
        if (g.fmt() == Format::document) {
          out << doc.dump(2) << '\n';
        } else {
          out << text;
        }
      } else {
        const auto t = g.intensities();
        if (g.fmt() == Format::document) {
          json rows = json::array();
          for (const auto& r : t.rows()) {
            rows.push_back({{"region_code", r.region_code},
                            {"intensity_lbs_per_kwh", r.intensity}});
          }
          out << json{{"vintage", t.vintage()}, {"regions", rows}, {"gaps", t.gaps()}}
                     .dump(2)
              << '\n';
        } else {
          out << "vintage: " << t.vintage() << '\n';
          out << "region  lbs_co2_per_kwh\n";
          for (const auto& r : t.rows()) {
            out << strf("%-6s  %s\n", r.region_code.c_str(), num(r.intensity).c_str());
          }
          if (!t.gaps().empty()) {
            out << "missing:";
            for (const auto& c : t.gaps()) out << ' ' << c;
            out << '\n';
          }
        }
      }
      return kExitOk;
    }

    if (*mark) {
      if (session_url.empty()) {
        const char* env = std::getenv(kSessionUrlEnv);
        if (!env || !*env) {
          err << "error: no session; set " << kSessionUrlEnv
              << " or pass --session-url\n";
          return kExitUsage;
        }
        session_url = env;
      }
      const auto [base, id] = split_session_url(session_url);
      ServiceClient client(base);
      const auto r =
          ServiceClient::expect_ok(client.post("/sessions/" + id + "/epoch"));
      if (g.fmt() == Format::document) {
        out << r.dump() << '\n';
      } else {
        out << strf("epoch %d: %s kWh%s\n", r["epoch"]["index"].get<int>(),
                    num(r["epoch"]["energy_kwh"].get<double>()).c_str(),
                    r["epoch"].value("degraded", false) ? " (degraded)" : "");
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    print_error(err, e);
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace epochwatt::cli
