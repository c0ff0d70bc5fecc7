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

#include <random>

#include "doctest.h"
#include "epochwatt/catalog.hpp"
#include "epochwatt/error.hpp"

using namespace epochwatt;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an epochwatt::Error");
  return Error(ErrorCode::not_found, "");
}

}  // namespace

TEST_CASE("hardware catalog loading") {
  SUBCASE("direct parse") {
    const auto c = load_hardware_catalog(
        "name,kind,power_draw_w,flops\nExampleGPU,gpu,250,14e12\n");
    const auto& e = c.lookup("ExampleGPU");
    CHECK(e.power_draw == 250.0);
    CHECK(e.flops == 1.4e13);
    CHECK(e.kind == DeviceKind::gpu);
  }
  SUBCASE("zero power is rejected with the row number") {
    const auto err = error_of([] {
      load_hardware_catalog(
          "name,kind,power_draw_w,flops\nA,gpu,250,1e12\nB,gpu,0,1e12\n");
    });
    CHECK(err.code() == ErrorCode::validation_error);
    CHECK(err.detail().find("line 3") != std::string::npos);
  }
  SUBCASE("non-numeric flops and bad kind are rejected") {
    CHECK(error_of([] {
            load_hardware_catalog("name,kind,power_draw_w,flops\nA,gpu,250,lots\n");
          }).code() == ErrorCode::validation_error);
    CHECK(error_of([] {
            load_hardware_catalog("name,kind,power_draw_w,flops\nA,tpu,250,1e12\n");
          }).code() == ErrorCode::validation_error);
    CHECK(error_of([] { load_hardware_catalog("device,watts\nA,1\n"); }).code() ==
          ErrorCode::validation_error);
  }
  SUBCASE("empty file gives an empty catalog") {
    const auto c = load_hardware_catalog("");
    CHECK(c.empty());
    const auto err = error_of([&] { c.lookup("anything"); });
    CHECK(err.code() == ErrorCode::unknown_hardware);
    CHECK(err.suggestions().empty());
  }
  SUBCASE("duplicates: last row wins with a warning") {
    const auto c = load_hardware_catalog(
        "name,kind,power_draw_w,flops\nA,gpu,100,1e12\na ,gpu,200,2e12\n");
    CHECK(c.size() == 1);
    CHECK(c.lookup("A").power_draw == 200.0);
    CHECK(c.warnings().size() == 1);
  }
  SUBCASE("quoted names may contain commas") {
    const auto c = load_hardware_catalog(
        "name,kind,power_draw_w,flops\n\"Board, rev 2\",cpu,95,1e12\n");
    CHECK(c.lookup("board, rev 2").power_draw == 95.0);
  }
}

TEST_CASE("device lookup") {
  const auto c = load_hardware_catalog(
      "name,kind,power_draw_w,flops\n"
      "ExampleGPU,gpu,250,14e12\n"
      "Tesla V100 SXM2,gpu,300,15.7e12\n"
      "Tesla V100 PCIe,gpu,250,14e12\n"
      "Tesla T4,gpu,70,8.1e12\n");
  CHECK(&c.lookup("ExampleGPU") == &c.lookup("examplegpu  "));
  CHECK(&c.lookup("tesla   v100\tsxm2") == &c.lookup("Tesla V100 SXM2"));

  const auto err = error_of([&] { c.lookup("V100"); });
  CHECK(err.code() == ErrorCode::unknown_hardware);
  CHECK(err.suggestions().size() == 2);

  const auto many = c.suggestions("e", 5);
  CHECK(many.size() == 4);
  CHECK(c.suggestions("tesla", 2).size() == 2);
  CHECK(c.suggestions("quantum").empty());
}

TEST_CASE("intensity table") {
  SUBCASE("direct parse and gaps") {
    const auto t = load_intensity_table(
        "region_code,intensity_lbs_per_kwh\nWY,2.1\nca,0.45\n", "test");
    CHECK(t.intensity("WY") == 2.1);
    CHECK(t.intensity("ca") == 0.45);
    CHECK(t.vintage() == "test");
    CHECK(t.gaps().size() == 49);
    CHECK(std::find(t.gaps().begin(), t.gaps().end(), "PR") == t.gaps().end());
  }
  SUBCASE("validation") {
    CHECK(error_of([] {
            load_intensity_table("region_code,intensity_lbs_per_kwh\nCA,-0.3\n");
          }).code() == ErrorCode::validation_error);
    CHECK(error_of([] {
            load_intensity_table(
                "region_code,intensity_lbs_per_kwh\nCA,0.3\nCA,0.4\n");
          }).code() == ErrorCode::validation_error);
  }
  SUBCASE("unknown region suggests neighbours") {
    const auto t = load_intensity_table(
        "region_code,intensity_lbs_per_kwh\nWY,2.1\nWA,0.2\nCA,0.4\n");
    const auto err = error_of([&] { t.intensity("WX"); });
    CHECK(err.code() == ErrorCode::unknown_region);
    CHECK(err.suggestions() == std::vector<std::string>{"WA", "WY"});
  }
}

TEST_CASE("catalog round trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> p(1, 800), s(1e9, 1e15), in(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::string hw = "name,kind,power_draw_w,flops\n";
    std::string it = "region_code,intensity_lbs_per_kwh\n";
    for (int i = 0; i < 30; ++i) {
      hw += "dev " + std::to_string(i) + (i % 2 ? ",cpu," : ",gpu,") +
            std::to_string(p(rng)) + "," + std::to_string(s(rng)) + "\n";
      it += us_region_codes()[static_cast<std::size_t>(i)] + "," +
            std::to_string(in(rng)) + "\n";
    }
    const auto catalog = load_hardware_catalog(hw);
    CHECK(load_hardware_catalog(to_csv(catalog)) == catalog);
    CHECK(to_csv(load_hardware_catalog(to_csv(catalog))) == to_csv(catalog));
    const auto table = load_intensity_table(it, "v");
    CHECK(load_intensity_table(to_csv(table), "v") == table);
  }
  // Loading is deterministic.
  const std::string text = "name,kind,power_draw_w,flops\nA,gpu,1,2\nB,cpu,3,4\n";
  CHECK(load_hardware_catalog(text) == load_hardware_catalog(text));
}
