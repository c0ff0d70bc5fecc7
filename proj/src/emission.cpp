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

#include "epochwatt/emission.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "epochwatt/error.hpp"
#include "epochwatt/numeric.hpp"

namespace epochwatt {
namespace {

void require_pue(double pue) {
  if (!std::isfinite(pue) || pue < 1.0) {
    throw Error(ErrorCode::domain_error, "PUE must be a finite value >= 1",
                std::to_string(pue));
  }
}

void require_non_negative(double value, const char* what) {
  if (!std::isfinite(value) || value < 0.0) {
    throw Error(ErrorCode::domain_error,
                std::string(what) + " must be finite and non-negative",
                std::to_string(value));
  }
}

void require_epochs(const EnergyProfile& profile) {
  if (profile.epochs.empty()) {
    throw Error(ErrorCode::insufficient_data,
                "profile has no closed epochs", profile.model_name);
  }
}

struct DeviceStream {
  std::vector<double> time;
  std::vector<double> watts;

  // Linear between samples, constant outside; the last sample wins at a
  // repeated timestamp.
  double at(double t) const {
    if (t <= time.front()) return watts.front();
    if (t >= time.back()) return watts.back();
    const auto hi = std::upper_bound(time.begin(), time.end(), t);
    const auto j = static_cast<std::size_t>(hi - time.begin());
    const std::size_t i = j - 1;
    if (time[i] == t) return watts[i];
    const double w = (t - time[i]) / (time[j] - time[i]);
    return watts[i] + w * (watts[j] - watts[i]);
  }
};

}  // namespace

double instantaneous_power(std::span<const double> device_powers, double pue) {
  require_pue(pue);
  double total = 0.0;
  for (double p : device_powers) {
    require_non_negative(p, "device power");
    total += p;
  }
  return pue * total;
}

PowerTrace aggregate_samples(std::span<const PowerSample> samples) {
  std::map<std::string, DeviceStream> devices;
  std::vector<double> stamps;
  stamps.reserve(samples.size());
  for (const auto& s : samples) {
    if (!std::isfinite(s.timestamp)) {
      throw Error(ErrorCode::malformed_stream, "non-finite sample timestamp",
                  s.device_id);
    }
    require_non_negative(s.power, "sample power");
    auto& stream = devices[s.device_id];
    if (!stream.time.empty() && s.timestamp < stream.time.back()) {
      throw Error(ErrorCode::malformed_stream,
                  "device timestamps went backwards",
                  s.device_id + " at t=" + std::to_string(s.timestamp));
    }
    stream.time.push_back(s.timestamp);
    stream.watts.push_back(s.power);
    stamps.push_back(s.timestamp);
  }
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());

  PowerTrace trace;
  trace.time = Eigen::Map<const Eigen::VectorXd>(
      stamps.data(), static_cast<Eigen::Index>(stamps.size()));
  trace.watts = Eigen::VectorXd::Zero(trace.time.size());
  for (const auto& [id, stream] : devices) {
    for (Eigen::Index i = 0; i < trace.time.size(); ++i) {
      trace.watts(i) += stream.at(trace.time(i));
    }
  }
  return trace;
}

double integrate_joules(const PowerTrace& trace) {
  if (trace.time.size() != trace.watts.size()) {
    throw Error(ErrorCode::malformed_stream,
                "time and power columns differ in length");
  }
  if (trace.time.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                "at least two samples are needed to integrate",
                std::to_string(trace.time.size()) + " sample(s)");
  }
  if (!strictly_increasing(trace.time)) {
    throw Error(ErrorCode::malformed_stream,
                "sample timestamps must strictly increase");
  }
  return trapezoid(trace.time, trace.watts);
}

double integrate_epoch_energy(const PowerTrace& trace, double pue) {
  require_pue(pue);
  const double joules = pue * integrate_joules(trace);
  return std::max(0.0, joules_to_kwh(joules));
}

double integrate_epoch_energy(std::span<const PowerSample> samples,
                              double pue) {
  return integrate_epoch_energy(aggregate_samples(samples), pue);
}

double epoch_emissions(double energy_kwh, double intensity) {
  require_non_negative(energy_kwh, "energy");
  require_non_negative(intensity, "intensity");
  return energy_kwh * intensity;
}

HardwareTotals hardware_totals(std::span<const HardwareSpec> hardware,
                               const HardwareCatalog& catalog) {
  if (hardware.empty()) {
    throw Error(ErrorCode::validation_error, "hardware list is empty");
  }
  HardwareTotals totals;
  for (const auto& spec : hardware) {
    if (spec.quantity < 1) {
      throw Error(ErrorCode::validation_error, "hardware quantity must be >= 1",
                  spec.catalog_key);
    }
    const auto& entry = catalog.lookup(spec.catalog_key);
    totals.power_draw += spec.quantity * entry.power_draw;
    totals.flops += spec.quantity * entry.flops;
  }
  return totals;
}

double hardware_rescale_factor(std::span<const HardwareSpec> original,
                               std::span<const HardwareSpec> alternative,
                               const HardwareCatalog& catalog) {
  const auto base = hardware_totals(original, catalog);
  const auto alt = hardware_totals(alternative, catalog);
  return (alt.power_draw / alt.flops) / (base.power_draw / base.flops);
}

void validate_counterfactual(const Counterfactual& cf,
                             const HardwareCatalog& hardware,
                             const IntensityTable& intensities) {
  if (cf.empty()) {
    throw Error(ErrorCode::validation_error,
                "counterfactual must set at least one of alt_region, "
                "alt_hardware, alt_pue");
  }
  if (cf.alt_pue) require_pue(*cf.alt_pue);
  if (cf.alt_hardware) hardware_totals(*cf.alt_hardware, hardware);
  if (cf.alt_region) intensities.intensity(*cf.alt_region);
}

EnergyProfile counterfactual_profile(const EnergyProfile& profile,
                                     const Counterfactual& cf,
                                     const HardwareCatalog& hardware,
                                     const IntensityTable& intensities) {
  require_epochs(profile);
  validate_counterfactual(cf, hardware, intensities);

  EnergyProfile out = profile;
  std::optional<double> scale;
  if (cf.alt_hardware) {
    scale = hardware_rescale_factor(profile.hardware, *cf.alt_hardware,
                                    hardware);
    out.hardware = *cf.alt_hardware;
  }
  if (cf.alt_pue) {
    require_pue(profile.pue);
    const double ratio = *cf.alt_pue / profile.pue;
    scale = scale ? *scale * ratio : ratio;
    out.pue = *cf.alt_pue;
  }
  if (cf.alt_region) out.region_code = *cf.alt_region;
  if (scale) {
    for (auto& epoch : out.epochs) epoch.energy_kwh *= *scale;
  }
  return out;
}

Eigen::VectorXd metric_values(const EnergyProfile& profile, Metric metric,
                              const IntensityTable& intensities) {
  const auto n = static_cast<Eigen::Index>(profile.epochs.size());
  Eigen::VectorXd values(n);
  const double intensity =
      metric == Metric::co2_lbs ? intensities.intensity(profile.region_code)
                                : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double kwh = profile.epochs[static_cast<std::size_t>(i)].energy_kwh;
    values(i) = metric == Metric::co2_lbs ? epoch_emissions(kwh, intensity)
                                          : kwh;
  }
  return values;
}

Extrapolation extrapolate(const Eigen::Ref<const Eigen::VectorXd>& values,
                          Eigen::Index horizon) {
  if (values.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                "extrapolation needs at least two recorded epochs",
                std::to_string(values.size()) + " epoch(s)");
  }
  if (horizon < 0) {
    throw Error(ErrorCode::domain_error, "horizon must be >= 0",
                std::to_string(horizon));
  }
  Extrapolation out;
  out.fit = fit_line(values);
  out.predicted = evaluate(out.fit, values.size(), horizon);
  for (Eigen::Index i = 0; i < out.predicted.size(); ++i) {
    if (out.predicted(i) < 0.0) {
      out.predicted(i) = 0.0;
      out.clamped.push_back(i);
    }
  }
  return out;
}

ProjectionSeries project(const EnergyProfile& profile, Metric metric,
                         const IntensityTable& intensities,
                         Eigen::Index horizon) {
  require_epochs(profile);
  ProjectionSeries series;
  series.metric = metric;
  series.recorded = metric_values(profile, metric, intensities);
  if (series.recorded.size() >= 2) {
    auto ex = extrapolate(series.recorded, horizon);
    series.extrapolated = std::move(ex.predicted);
    series.fit = ex.fit;
    series.clamped = std::move(ex.clamped);
  } else if (horizon > 0) {
    throw Error(ErrorCode::insufficient_data,
                "extrapolation needs at least two recorded epochs",
                profile.model_name);
  } else {
    series.extrapolated.resize(0);
  }
  return series;
}

ProjectionSeries apply_counterfactual(const EnergyProfile& profile,
                                      const Counterfactual& cf, Metric metric,
                                      const HardwareCatalog& hardware,
                                      const IntensityTable& intensities,
                                      Eigen::Index horizon) {
  return project(counterfactual_profile(profile, cf, hardware, intensities),
                 metric, intensities, horizon);
}

AlignedComparison compare_profiles(const EnergyProfile& base,
                                   const EnergyProfile& alternative,
                                   Metric metric,
                                   const IntensityTable& intensities,
                                   Eigen::Index horizon) {
  AlignedComparison out;
  out.base = project(base, metric, intensities, horizon);
  out.alternative = project(alternative, metric, intensities, horizon);
  out.axis_length =
      std::max(out.base.recorded.size(), out.alternative.recorded.size()) +
      horizon;
  return out;
}

std::vector<std::optional<double>> on_axis(const ProjectionSeries& series,
                                           Eigen::Index axis_length) {
  std::vector<std::optional<double>> out(
      static_cast<std::size_t>(std::max<Eigen::Index>(axis_length, 0)));
  const Eigen::Index n = series.recorded.size();
  for (Eigen::Index i = 0; i < axis_length; ++i) {
    if (i < n) {
      out[static_cast<std::size_t>(i)] = series.recorded(i);
    } else if (i - n < series.extrapolated.size()) {
      out[static_cast<std::size_t>(i)] = series.extrapolated(i - n);
    }
  }
  return out;
}

Eigen::VectorXd cumulative(const ProjectionSeries& series) {
  Eigen::VectorXd all(series.length());
  all.head(series.recorded.size()) = series.recorded;
  all.tail(series.extrapolated.size()) = series.extrapolated;
  return prefix_sum(all);
}

bool operator==(const ProjectionSeries& a, const ProjectionSeries& b) {
  const auto same = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return x.size() == y.size() && (x.array() == y.array()).all();
  };
  const bool fits_equal =
      a.fit.has_value() == b.fit.has_value() &&
      (!a.fit || (a.fit->slope == b.fit->slope &&
                  a.fit->intercept == b.fit->intercept));
  return a.metric == b.metric && same(a.recorded, b.recorded) &&
         same(a.extrapolated, b.extrapolated) && fits_equal &&
         a.clamped == b.clamped;
}

}  // namespace epochwatt
