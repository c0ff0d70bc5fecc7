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

#include <string>
#include <vector>

#include "epochwatt/catalog.hpp"
#include "epochwatt/types.hpp"

namespace epochwatt::fixtures {

inline HardwareCatalog hardware() {
  return load_hardware_catalog(
      "name,kind,power_draw_w,flops\n"
      "ExampleGPU,gpu,250,14e12\n"
      "AltGPU,gpu,300,35e12\n"
      "Example CPU,cpu,150,1.5e12\n"
      "Tiny Accelerator,gpu,70,8.1e12\n");
}

inline IntensityTable intensities() {
  return load_intensity_table(
      "region_code,intensity_lbs_per_kwh\n"
      "CA,0.9\n"
      "WA,0.45\n"
      "WY,2.1\n"
      "VT,0\n",
      "test-fixture");
}

/// Profile with the given per-epoch kWh values, 60 s per epoch.
inline EnergyProfile profile(const std::vector<double>& kwh,
                             std::string region = "CA", double pue = 1.0,
                             std::vector<HardwareSpec> hw = {{"ExampleGPU", 1}}) {
  EnergyProfile p;
  p.model_name = "fixture";
  p.hardware = std::move(hw);
  p.region_code = std::move(region);
  p.pue = pue;
  p.created_at = "2026-01-01T00:00:00Z";
  for (std::size_t i = 0; i < kwh.size(); ++i) {
    p.epochs.push_back({static_cast<int>(i), 60.0, kwh[i]});
  }
  return p;
}

}  // namespace epochwatt::fixtures
