// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lixp/array.hpp"
#include "lixp/autodiff.hpp"

namespace lixp {

/// Scalar objective over a list of parameter arrays.
using ScalarFn = std::function<double(std::span<const Array2>)>;

/// Central differences (f(p+h) - f(p-h)) / 2h for every coordinate of every
/// parameter. Touches only forward evaluations of `f`.
std::vector<Array2> finite_difference_grad(const ScalarFn& f, std::span<const Array2> params,
                                           double h = 1e-5);

/// Builds a scalar loss on `g` from one leaf per parameter.
using LossBuilder = std::function<ad::Var(ad::Graph& g, std::span<const ad::Var> params)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  /// Worst coordinate, for diagnostics.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::vector<Array2> analytic;
  std::vector<Array2> numeric;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps coordinates
/// whose true gradient is zero from dividing finite-difference noise by ~0.
inline constexpr double kGradcheckFloor = 1e-6;

/// Compares backward() against finite_difference_grad on the same builder.
GradcheckResult gradcheck(const LossBuilder& build, std::span<const Array2> params,
                          double h = 1e-5, double floor = kGradcheckFloor);

/// Evaluate the builder once without backward.
double evaluate(const LossBuilder& build, std::span<const Array2> params);

}  // namespace lixp
