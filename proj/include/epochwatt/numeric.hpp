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

// Dense numeric kernels behind the emission math. Everything here is a
// template over Eigen expressions so callers can pass blocks, maps or
// temporaries without copies.

#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include "epochwatt/types.hpp"

namespace epochwatt {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Area under the piecewise-linear curve through (t[i], y[i]).
/// Requires t.size() == y.size(); returns 0 for fewer than two points.
template <typename DerivedT, typename DerivedY>
typename DerivedY::Scalar trapezoid(const Eigen::MatrixBase<DerivedT>& t,
                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedY::Scalar;
  eigen_assert(t.size() == y.size());
  const Eigen::Index n = y.size();
  if (n < 2) return Scalar(0);
  const auto dt = t.tail(n - 1) - t.head(n - 1);
  const auto mid = y.tail(n - 1) + y.head(n - 1);
  return Scalar(0.5) * dt.cwiseProduct(mid).sum();
}

/// True when every step of t is strictly positive.
template <typename Derived>
bool strictly_increasing(const Eigen::MatrixBase<Derived>& t) {
  const Eigen::Index n = t.size();
  if (n < 2) return true;
  return ((t.tail(n - 1) - t.head(n - 1)).array() > 0).all();
}

/// Ordinary least squares of y against x = 0, 1, ..., n-1.
/// Solved by column-pivoting QR on the [x, 1] design matrix.
template <typename Derived>
LinearFit<typename Derived::Scalar> fit_line(
    const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = y.size();
  eigen_assert(n >= 2);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> design(n, 2);
  design.col(0) = Vector<Scalar>::LinSpaced(n, Scalar(0), Scalar(n - 1));
  design.col(1).setOnes();
  const Eigen::Matrix<Scalar, 2, 1> beta =
      design.colPivHouseholderQr().solve(y.derived().eval());
  return {beta(0), beta(1)};
}

/// Evaluates `fit` at x = first, first + 1, ..., first + count - 1.
template <typename Scalar>
Vector<Scalar> evaluate(const LinearFit<Scalar>& fit, Eigen::Index first,
                        Eigen::Index count) {
  if (count <= 0) return Vector<Scalar>(0);
  const Vector<Scalar> x = Vector<Scalar>::LinSpaced(
      count, Scalar(first), Scalar(first + count - 1));
  return (fit.slope * x.array() + fit.intercept).matrix();
}

/// Running totals: out[i] = y[0] + ... + y[i].
template <typename Derived>
Vector<typename Derived::Scalar> prefix_sum(
    const Eigen::MatrixBase<Derived>& y) {
  Vector<typename Derived::Scalar> out(y.size());
  typename Derived::Scalar acc(0);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    acc += y(i);
    out(i) = acc;
  }
  return out;
}

}  // namespace epochwatt
