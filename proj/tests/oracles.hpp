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

// Independent reference computations used only by tests. None of these
// call into the library's numeric kernels.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace epochwatt::oracle {

/// Closed-form simple linear regression of y on x = 0..n-1 via the normal
/// equations: slope = Sxy / Sxx, intercept = ybar - slope * xbar. Sums are
/// accumulated in long double.
struct Line {
  double slope;
  double intercept;
};

inline Line normal_equation_fit(const std::vector<double>& y) {
  const auto n = static_cast<long double>(y.size());
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sx += static_cast<long double>(i);
    sy += y[i];
  }
  const long double xbar = sx / n, ybar = sy / n;
  long double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double dx = static_cast<long double>(i) - xbar;
    sxx += dx * dx;
    sxy += dx * (y[i] - ybar);
  }
  const long double slope = sxy / sxx;
  return {static_cast<double>(slope), static_cast<double>(ybar - slope * xbar)};
}

/// Exact integral of mean + amplitude * sin(2*pi*t / period) over [a, b].
inline double sine_integral(double mean, double amplitude, double period,
                            double a, double b) {
  const double w = 2.0 * std::numbers::pi / period;
  return mean * (b - a) + amplitude / w * (std::cos(w * a) - std::cos(w * b));
}

/// Exact integral of a ramp from p0 to p1 over [0, d], held afterwards,
/// evaluated over [0, b].
inline double ramp_integral(double p0, double p1, double d, double b) {
  if (b <= d) return p0 * b + 0.5 * (p1 - p0) * b * b / d;
  return 0.5 * (p0 + p1) * d + p1 * (b - d);
}

/// A synthetic wrapping energy counter: true consumed energy accumulates
/// without bound; the visible register is the total modulo `range`.
struct WrappingCounter {
  std::uint64_t range;
  std::uint64_t total = 0;  // ground truth, never wraps in tests
  std::uint64_t visible() const { return total % range; }
  void consume(std::uint64_t uj) { total += uj; }
};

inline double relative_error(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

}  // namespace epochwatt::oracle
