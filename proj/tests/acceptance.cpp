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

// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned.
// Exit status is the number of failing criteria (0 when all pass).

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "epochwatt/catalog.hpp"
#include "epochwatt/cli.hpp"
#include "epochwatt/emission.hpp"
#include "epochwatt/http_api.hpp"
#include "epochwatt/numeric.hpp"
#include "epochwatt/profile_document.hpp"
#include "epochwatt/sampling.hpp"
#include "epochwatt/service.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "golden_cases.hpp"
#include "oracles.hpp"

using namespace epochwatt;
using nlohmann::json;

namespace {

const std::string kTestDir = EPOCHWATT_TEST_DIR;
const std::string kCli = EPOCHWATT_CLI_PATH;
const std::string kDataDir = EPOCHWATT_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  // Records a failed check and keeps going so the note lists every miss.
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << "[miss] " << what << "; ";
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct LiveService {
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  std::unique_ptr<TrackingService> service;
  std::unique_ptr<HttpServer> http;
  std::unique_ptr<ServiceClient> client;

  LiveService(Waveform wave, double interval) {
    ServiceOptions opts;
    opts.clock = clock;
    opts.sampler.interval = interval;
    opts.default_simulation = wave;
    service = std::make_unique<TrackingService>(
        fixtures::hardware(), fixtures::intensities(), std::move(opts));
    HttpOptions h;
    h.port = 0;
    http = std::make_unique<HttpServer>(*service, h);
    http->start();
    client = std::make_unique<ServiceClient>(http->url());
  }

  std::string start(const std::string& region = "CA") {
    const json req = {{"model_name", "acceptance"},
                      {"hardware", {{{"catalog_key", "ExampleGPU"}, {"quantity", 1}}}},
                      {"region_code", region},
                      {"pue", 1.0}};
    return ServiceClient::expect_ok(client->post("/sessions", req))["id"];
  }
};

// ---------------------------------------------------------------------------

Outcome simulated_end_to_end() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  LiveService live(ConstantWave{200.0}, 1.0);
  const auto id = live.start("CA");
  // The simulated clock advances in 1 s steps while the sampler thread runs.
  for (int epoch = 0; epoch < 5; ++epoch) {
    for (int s = 0; s < 60; ++s) live.clock->advance(1.0);
    ServiceClient::expect_ok(live.client->post("/sessions/" + id + "/epoch"));
  }
  ServiceClient::expect_ok(live.client->post("/sessions/" + id + "/halt"));
  const auto doc =
      ServiceClient::expect_ok(live.client->get("/profiles/" + id + "/export"));
  const auto profile = from_document(doc);
  const auto co2 = ServiceClient::expect_ok(live.client->post(
      "/whatif", {{"profile_id", id}, {"metric", "co2"}}))["baseline"]["recorded"];

  const double want_kwh = 200.0 * 60.0 / 3.6e6;
  double worst_kwh = 0.0, worst_co2 = 0.0;
  o.require(profile.epochs.size() == 5, "5 epochs");
  for (std::size_t i = 0; i < profile.epochs.size() && i < co2.size(); ++i) {
    worst_kwh = std::max(worst_kwh, oracle::relative_error(
                                        profile.epochs[i].energy_kwh, want_kwh));
    worst_co2 = std::max(worst_co2,
                         oracle::relative_error(co2[i].get<double>(), 0.003));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst_kwh <= 1e-6, "kWh within 1e-6 relative");
  o.require(worst_co2 <= 1e-6, "CO2 within 1e-6 relative");
  o.require(elapsed < 10.0, "runtime < 10 s");
  o.note << "max rel err kWh " << sci(worst_kwh) << ", CO2 " << sci(worst_co2)
         << ", runtime " << sci(elapsed) << " s";
  return o;
}

Outcome hardware_counterfactual() {
  Outcome o;
  const auto hw = fixtures::hardware();
  const auto regions = fixtures::intensities();
  const auto factor = hardware_rescale_factor(std::vector<HardwareSpec>{{"ExampleGPU", 1}},
                                              std::vector<HardwareSpec>{{"AltGPU", 1}}, hw);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-4, 10.0);
  std::vector<double> kwh(40);
  for (auto& v : kwh) v = u(rng);
  const auto base = fixtures::profile(kwh);
  Counterfactual cf;
  cf.alt_hardware = std::vector<HardwareSpec>{{"AltGPU", 1}};
  const auto alt = apply_counterfactual(base, cf, Metric::kwh, hw, regions);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < alt.recorded.size(); ++i) {
    worst = std::max(worst, std::abs(alt.recorded(i) / kwh[static_cast<std::size_t>(i)] - 0.48));
  }
  o.require(std::abs(factor - 0.48) <= 1e-12, "factor 0.48 +- 1e-12");
  o.require(worst <= 1e-12, "every kWh scaled by 0.48 +- 1e-12");
  o.note << "factor " << std::setprecision(17) << factor
         << ", max |ratio - 0.48| " << sci(worst);
  return o;
}

Outcome region_counterfactual() {
  Outcome o;
  const auto hw = fixtures::hardware();
  const auto regions = fixtures::intensities();  // CA 0.9 -> WA 0.45
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1e-4, 10.0);
  std::vector<double> kwh(40);
  for (auto& v : kwh) v = u(rng);
  const auto base = fixtures::profile(kwh, "CA");
  Counterfactual cf;
  cf.alt_region = "WA";
  const auto alt_kwh = apply_counterfactual(base, cf, Metric::kwh, hw, regions);
  const auto base_kwh = project(base, Metric::kwh, regions);
  const auto alt_co2 = apply_counterfactual(base, cf, Metric::co2_lbs, hw, regions);
  const auto base_co2 = project(base, Metric::co2_lbs, regions);
  const bool identical = (alt_kwh.recorded.array() == base_kwh.recorded.array()).all();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < base_co2.recorded.size(); ++i) {
    worst = std::max(worst, oracle::relative_error(alt_co2.recorded(i),
                                                   0.5 * base_co2.recorded(i)));
  }
  o.require(identical, "kWh series bit-identical");
  o.require(worst <= 1e-15, "CO2 halved pointwise");
  o.note << "kWh identical: " << (identical ? "yes" : "no")
         << ", max rel err of halved CO2 " << sci(worst);
  return o;
}

Outcome extrapolation() {
  Outcome o;
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y(i) = 3.0 * i + 2.0;
  const auto ex = extrapolate(y, 5);
  double worst_line = 0.0;
  for (int k = 0; k < 5; ++k) {
    worst_line = std::max(worst_line,
                          oracle::relative_error(ex.predicted(k), 3.0 * (10 + k) + 2.0));
  }
  o.require(ex.predicted.size() == 5 && worst_line <= 1e-9,
            "y = 3x + 2 horizon 5 within 1e-9");

  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> len(2, 200);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_slope = 0.0, worst_icpt = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const int n = len(rng);
    const double slope = (u(rng) > 0 ? 1 : -1) * std::pow(10.0, 2 * u(rng));
    const double icpt = (u(rng) > 0 ? 1 : -1) * std::pow(10.0, 2 * u(rng) + 1);
    const double noise = 0.1 * std::abs(slope);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = slope * i + icpt + noise * u(rng);
    const auto fit = fit_line(Eigen::Map<const Eigen::VectorXd>(v.data(), n));
    const auto ref = oracle::normal_equation_fit(v);
    worst_slope = std::max(worst_slope, oracle::relative_error(fit.slope, ref.slope));
    worst_icpt = std::max(worst_icpt, oracle::relative_error(fit.intercept, ref.intercept));
  }
  o.require(worst_slope <= 1e-9, "1000 random slopes within 1e-9");
  o.require(worst_icpt <= 1e-9, "1000 random intercepts within 1e-9");
  o.note << "line max rel err " << sci(worst_line) << ", random slope "
         << sci(worst_slope) << ", intercept " << sci(worst_icpt);
  return o;
}

// Runs a simulated session with one epoch over [0, end] and compares its
// energy with the closed-form integral.
double sine_session_error(double interval, double end) {
  const SineWave wave{50.0, 50.0, 60.0};
  ServiceOptions opts;
  auto clock = std::make_shared<ManualClock>();
  opts.clock = clock;
  opts.sampler.interval = interval;
  opts.default_simulation = wave;
  TrackingService svc(fixtures::hardware(), fixtures::intensities(), opts);
  SessionRequest r{"sine", {{"ExampleGPU", 1}}, "CA"};
  const auto id = svc.start_session(r).id;
  clock->set(end);
  const auto rec = svc.mark_epoch(id);
  const double want = oracle::sine_integral(wave.mean, wave.amplitude,
                                            wave.period_s, 0.0, end);
  return oracle::relative_error(kwh_to_joules(rec.energy_kwh), want);
}

Outcome integration_oracle() {
  Outcome o;
  const double e1 = sine_session_error(1.0, 45.0);
  const double e01 = sine_session_error(0.1, 45.0);
  o.require(e1 < 1e-3, "1 s sampling within 0.1%");
  o.require(e01 < 1e-5, "0.1 s sampling within 0.001%");
  o.note << "sine 50+50sin(2pi t/60) over [0,45] s: rel err " << sci(e1)
         << " at 1 s, " << sci(e01) << " at 0.1 s";
  return o;
}

Outcome rapl_wraparound() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("epochwatt-accept-rapl-" + std::to_string(::getpid()));
  const auto domain = dir / "intel-rapl:0";
  std::filesystem::create_directories(domain);
  const std::uint64_t range = 262143328850ULL;
  std::ofstream(domain / "name") << "package-0\n";
  std::ofstream(domain / "max_energy_range_uj") << range << '\n';

  oracle::WrappingCounter truth{range};
  const auto write_counter = [&] {
    std::ofstream(domain / "energy_uj", std::ios::trunc) << truth.visible() << '\n';
  };
  truth.consume(range - 1000);  // start just before a wrap
  write_counter();

  RaplSource src("rapl:package-0", domain);
  const std::uint64_t start_total = truth.total;
  std::uint64_t summed = 0;
  double joules_from_power = 0.0;
  auto prev = src.snapshot(0.0);
  src.read(0.0);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> step(20'000'000'000ULL, 90'000'000'000ULL);
  double t = 0.0;
  while (truth.total - start_total < 3 * range + range / 2) {
    truth.consume(step(rng));
    write_counter();
    t += 0.5;
    const auto snap = src.snapshot(t);
    summed += cpu_energy_delta_uj(prev, snap);
    const auto sample = src.read(t);
    if (sample) joules_from_power += sample->power * (snap.timestamp - prev.timestamp);
    prev = snap;
  }
  std::filesystem::remove_all(dir);

  const std::uint64_t consumed = truth.total - start_total;
  const std::uint64_t wraps = truth.total / range - (range - 1000) / range;
  const double want_j = static_cast<double>(consumed) * 1e-6;
  o.require(wraps >= 3, "at least 3 wraps");
  o.require(summed == consumed, "integer deltas sum to ground truth exactly");
  o.require(oracle::relative_error(joules_from_power, want_j) <= 1e-12,
            "power samples integrate to ground truth");
  o.note << wraps << " wraps, " << consumed << " uJ consumed, lost "
         << static_cast<long long>(consumed - summed) << " uJ";
  return o;
}

Outcome round_trips() {
  Outcome o;
  std::mt19937_64 rng(2026);
  TrackingService svc(fixtures::hardware(), fixtures::intensities());
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = generators::random_profile(rng);
    const auto id = svc.import_profile(parse_profile(serialize_profile(p)));
    const auto back = parse_profile(serialize_profile(svc.export_profile(id)));
    if (back == p && from_document(to_document(p)) == p) ++equal;
  }
  o.require(equal == 100, "100 random profiles round trip");

  bool tables = true;
  for (const auto& dir : {kDataDir, kTestDir + "/fixtures"}) {
    const auto hw_path = dir + (dir == kDataDir ? "/hardware.csv" : "/hardware.csv");
    const auto in_path = dir + (dir == kDataDir ? "/intensity_us.csv" : "/intensity.csv");
    const auto hw = load_hardware_catalog_file(hw_path);
    tables &= load_hardware_catalog(to_csv(hw)) == hw;
    const auto it = load_intensity_table_file(in_path);
    tables &= load_intensity_table(to_csv(it), it.vintage()) == it;
  }
  o.require(tables, "catalog and intensity tables round trip");
  o.note << equal << "/100 profiles equal after export/import; tables "
         << (tables ? "equal" : "differ");
  return o;
}

Outcome service_contract() {
  Outcome o;
  // 0.1 s sampling, 1000 s per epoch: 10^4 samples in each open epoch.
  LiveService live(SineWave{150.0, 50.0, 37.0}, 0.1);
  const auto a = live.start("CA");
  const auto b = live.start("WA");
  o.require(a != b, "distinct session ids");

  std::map<std::string, double> slowest;
  const auto timed = [&](const std::string& name, auto&& call) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = call();
    slowest[name] = std::max(slowest[name], seconds_since(t0));
    return ServiceClient::expect_ok(r);
  };

  std::map<std::string, std::size_t> last_count{{a, 0}, {b, 0}};
  std::map<std::string, json> closed;
  bool monotone = true, isolated = true;
  std::size_t peak_samples = 0;
  for (int round = 0; round < 6; ++round) {
    live.clock->advance(1000.0);
    for (const auto& id : {a, b}) {
      const auto snap = timed("GET /sessions/{id}/profile", [&] {
        return live.client->get("/sessions/" + id + "/profile");
      });
      peak_samples = std::max<std::size_t>(peak_samples,
                                           snap["session"]["provisional"]["samples"]);
      monotone &= snap["epochs"].size() >= last_count[id];
      last_count[id] = snap["epochs"].size();
    }
    // Interleave marks: A then B on even rounds, B then A on odd ones.
    const auto first = round % 2 ? b : a;
    const auto second = round % 2 ? a : b;
    for (const auto& id : {first, second}) {
      const auto other = id == a ? b : a;
      const auto before = ServiceClient::expect_ok(
          live.client->get("/sessions/" + other + "/profile"))["epochs"];
      timed("POST /sessions/{id}/epoch", [&] {
        return live.client->post("/sessions/" + id + "/epoch");
      });
      const auto after = ServiceClient::expect_ok(
          live.client->get("/sessions/" + other + "/profile"))["epochs"];
      isolated &= before == after;
    }
  }
  for (const auto& id : {a, b}) {
    const auto snap =
        ServiceClient::expect_ok(live.client->get("/sessions/" + id + "/profile"));
    monotone &= snap["epochs"].size() == 6;
  }

  live.clock->advance(1000.0);
  const auto doc = timed("GET /profiles/{id}/export", [&] {
    return live.client->get("/profiles/" + a + "/export");
  });
  const auto imported = timed("POST /profiles", [&] {
    return live.client->post("/profiles", doc);
  })["id"].get<std::string>();
  timed("GET /profiles", [&] { return live.client->get("/profiles"); });
  const json whatif = {{"profile_id", a},
                       {"metric", "co2"},
                       {"horizon", 10},
                       {"overlay_profile_id", imported},
                       {"counterfactual",
                        {{"alt_region", "WY"},
                         {"alt_pue", 1.3},
                         {"alt_hardware", {{{"catalog_key", "AltGPU"}, {"quantity", 2}}}}}}};
  const auto w1 = timed("POST /whatif", [&] { return live.client->post("/whatif", whatif); });
  const auto w2 = timed("POST /whatif", [&] { return live.client->post("/whatif", whatif); });
  o.require(w1 == w2, "what-if repeatable");
  timed("GET /catalog/hardware", [&] { return live.client->get("/catalog/hardware"); });
  timed("GET /catalog/intensity", [&] { return live.client->get("/catalog/intensity"); });
  timed("GET /health", [&] { return live.client->get("/health"); });
  timed("POST /sessions", [&] {
    return live.client->post(
        "/sessions", {{"model_name", "c"},
                      {"hardware", {{{"catalog_key", "ExampleGPU"}, {"quantity", 1}}}},
                      {"region_code", "CA"}});
  });
  timed("POST /sessions/{id}/pause", [&] { return live.client->post("/sessions/" + b + "/pause"); });
  timed("POST /sessions/{id}/resume", [&] { return live.client->post("/sessions/" + b + "/resume"); });
  timed("POST /sessions/{id}/halt", [&] { return live.client->post("/sessions/" + a + "/halt"); });

  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, s] : slowest) {
    if (s > worst) {
      worst = s;
      worst_name = name;
    }
  }
  o.require(monotone, "snapshot monotonicity");
  o.require(isolated, "session isolation");
  o.require(peak_samples >= 10000, ">= 10^4 samples per open epoch exercised");
  o.require(slowest.size() == 13, "all 13 endpoints timed");
  o.require(worst < 0.1, "every endpoint < 100 ms");
  o.note << slowest.size() << " endpoints, " << peak_samples
         << " samples/epoch, slowest " << worst_name << " " << sci(worst * 1e3)
         << " ms";
  return o;
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc run_cli(const std::vector<std::string>& args) {
  std::string cmd = "cd '" + kTestDir + "' && '" + kCli + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " 2>/dev/null";
  Proc p;
  FILE* f = ::popen(cmd.c_str(), "r");
  if (!f) return p;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) p.out.append(buf, n);
  const int status = ::pclose(f);
  p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_golden_and_exit_codes() {
  Outcome o;
  int matched = 0, total = 0, reports = 0;
  std::vector<std::string> profiles_seen;
  for (const auto& c : golden::cases()) {
    auto args = golden::kCatalogArgs;
    args.insert(args.end(), c.args.begin(), c.args.end());
    const auto want = slurp(kTestDir + "/golden/" + c.name + ".txt");
    const auto first = run_cli(args);
    const auto second = run_cli(args);
    ++total;
    const bool ok = first.code == 0 && !want.empty() && first.out == want &&
                    second.out == want;
    if (ok) ++matched;
    if (c.name.rfind("report_", 0) == 0) {
      ++reports;
      for (const auto& a : c.args) {
        if (a.rfind("fixtures/profiles/", 0) == 0 &&
            std::find(profiles_seen.begin(), profiles_seen.end(), a) == profiles_seen.end()) {
          profiles_seen.push_back(a);
        }
      }
    }
    o.require(ok, c.name + " byte-stable");
  }
  o.require(profiles_seen.size() >= 3, "reports cover 3 fixture profiles");

  const std::vector<std::string> track = {
      "--hardware-catalog", "fixtures/hardware.csv", "--intensity-table",
      "fixtures/intensity.csv", "track", "--hardware", "ExampleGPU",
      "--region", "CA", "--simulate", "constant:200", "--"};
  const auto tracked = [&](std::vector<std::string> child) {
    auto args = track;
    args.insert(args.end(), child.begin(), child.end());
    return run_cli(args).code;
  };
  const int c0 = tracked({"sh", "-c", "exit 0"});
  const int c3 = tracked({"sh", "-c", "exit 3"});
  const int c42 = tracked({"sh", "-c", "exit 42"});
  const int sig = tracked({"sh", "-c", "kill -TERM $$"});
  const int missing = tracked({"/nonexistent/command"});
  o.require(c0 == 0 && c3 == 3 && c42 == 42, "child exit codes propagated");
  o.require(sig == 128 + 15, "signal exit maps to 128 + signal");
  o.require(missing != 0, "spawn failure exits non-zero");
  o.note << matched << "/" << total << " golden outputs byte-stable ("
         << profiles_seen.size() << " report profiles); exit codes 0,3,42,sig,missing -> "
         << c0 << "," << c3 << "," << c42 << "," << sig << "," << missing;
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"simulated-end-to-end", simulated_end_to_end},
      {"hardware-counterfactual", hardware_counterfactual},
      {"region-counterfactual", region_counterfactual},
      {"extrapolation", extrapolation},
      {"integration-oracle", integration_oracle},
      {"rapl-wraparound", rapl_wraparound},
      {"round-trips", round_trips},
      {"service-contract", service_contract},
      {"cli-golden-and-exit-codes", cli_golden_and_exit_codes},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << "exception: " << e.what();
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << "  " << o.note.str()
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/"
            << criteria.size() << " criteria passed" << std::endl;
  return failures;
}
