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

// Emission math: power aggregation, per-epoch energy, CO2 conversion,
// hardware rescaling, counterfactuals and least-squares extrapolation.
// All functions are pure.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "epochwatt/catalog.hpp"
#include "epochwatt/types.hpp"

namespace epochwatt {

/// Total power of all devices at one instant, on a common time axis.
struct PowerTrace {
  Eigen::VectorXd time;   // seconds, strictly increasing
  Eigen::VectorXd watts;  // summed over devices, PUE not applied
};

/// pue * sum(device_powers). An empty list yields 0.
double instantaneous_power(std::span<const double> device_powers, double pue);

/// Merges per-device samples onto the union of their timestamps. Each device
/// is linearly interpolated between its own samples and held constant
/// outside them. Throws malformed_stream if any device goes back in time.
PowerTrace aggregate_samples(std::span<const PowerSample> samples);

/// Trapezoidal integral of the trace in joules (PUE not applied).
double integrate_joules(const PowerTrace& trace);

/// Energy of one epoch window in kWh, PUE applied.
/// Throws insufficient_data below two points, malformed_stream when time
/// does not strictly increase.
double integrate_epoch_energy(const PowerTrace& trace, double pue);
double integrate_epoch_energy(std::span<const PowerSample> samples,
                              double pue);

/// lbs CO2 for `energy_kwh` at `intensity` lbs/kWh.
double epoch_emissions(double energy_kwh, double intensity);

/// Aggregate power and FLOPS over a hardware list (quantity-weighted).
struct HardwareTotals {
  double power_draw = 0.0;
  double flops = 0.0;
};
HardwareTotals hardware_totals(std::span<const HardwareSpec> hardware,
                               const HardwareCatalog& catalog);

/// (P_alt / S_alt) / (P / S) with P, S the quantity-weighted sums of power
/// draw and FLOPS over each list.
double hardware_rescale_factor(std::span<const HardwareSpec> original,
                               std::span<const HardwareSpec> alternative,
                               const HardwareCatalog& catalog);

/// Throws when `cf` sets nothing or names unknown hardware/regions.
void validate_counterfactual(const Counterfactual& cf,
                             const HardwareCatalog& hardware,
                             const IntensityTable& intensities);

/// The profile as it would have looked under `cf`: energies rescaled by the
/// hardware factor and alt_pue / pue, metadata swapped. A region-only
/// counterfactual leaves every energy value untouched.
EnergyProfile counterfactual_profile(const EnergyProfile& profile,
                                     const Counterfactual& cf,
                                     const HardwareCatalog& hardware,
                                     const IntensityTable& intensities);

/// Per-epoch kWh, or kWh * intensity(profile region) for co2_lbs.
Eigen::VectorXd metric_values(const EnergyProfile& profile, Metric metric,
                              const IntensityTable& intensities);

struct Extrapolation {
  Eigen::VectorXd predicted;
  LinearFit<double> fit;
  std::vector<Eigen::Index> clamped;
};

/// OLS of value against epoch index, predicted at n .. n + horizon - 1.
/// Negative predictions are clamped to 0 and their positions reported.
Extrapolation extrapolate(const Eigen::Ref<const Eigen::VectorXd>& values,
                          Eigen::Index horizon);

/// Recorded series plus `horizon` predicted epochs. Fewer than two epochs
/// is allowed only when horizon is 0 (the fit is then absent).
ProjectionSeries project(const EnergyProfile& profile, Metric metric,
                         const IntensityTable& intensities,
                         Eigen::Index horizon = 0);

ProjectionSeries apply_counterfactual(const EnergyProfile& profile,
                                      const Counterfactual& cf, Metric metric,
                                      const HardwareCatalog& hardware,
                                      const IntensityTable& intensities,
                                      Eigen::Index horizon = 0);

/// Two projections sharing the axis 0 .. max(len) + horizon - 1. Each series
/// keeps its own recorded length and its own `horizon` predictions; later
/// axis positions are simply absent for the shorter profile.
struct AlignedComparison {
  Eigen::Index axis_length = 0;
  ProjectionSeries base;
  ProjectionSeries alternative;
};

AlignedComparison compare_profiles(const EnergyProfile& base,
                                   const EnergyProfile& alternative,
                                   Metric metric,
                                   const IntensityTable& intensities,
                                   Eigen::Index horizon = 0);

/// Values laid out on an axis of `axis_length`; nullopt where absent.
std::vector<std::optional<double>> on_axis(const ProjectionSeries& series,
                                           Eigen::Index axis_length);

/// Recorded followed by extrapolated values, as running totals.
Eigen::VectorXd cumulative(const ProjectionSeries& series);

}  // namespace epochwatt
