// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lixp {

std::vector<Array2> finite_difference_grad(const ScalarFn& f, std::span<const Array2> params,
                                           double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_grad: h must be positive");
  std::vector<Array2> work(params.begin(), params.end());
  std::vector<Array2> grads;
  grads.reserve(work.size());
  for (std::size_t p = 0; p < work.size(); ++p) {
    Array2 grad(work[p].rows(), work[p].cols());
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double orig = work[p].data()[i];
      work[p].data()[i] = orig + h;
      const double up = f(work);
      work[p].data()[i] = orig - h;
      const double down = f(work);
      work[p].data()[i] = orig;
      grad.data()[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

double evaluate(const LossBuilder& build, std::span<const Array2> params) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(g.parameter(p));
  return build(g, vars).value().item();
}

GradcheckResult gradcheck(const LossBuilder& build, std::span<const Array2> params, double h,
                          double floor) {
  GradcheckResult result;
  {
    ad::Graph g;
    std::vector<ad::Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(g.parameter(p));
    ad::Var loss = build(g, vars);
    g.backward(loss);
    for (const auto& v : vars) result.analytic.push_back(v.grad());
  }
  result.numeric = finite_difference_grad(
      [&](std::span<const Array2> ps) { return evaluate(build, ps); }, params, h);

  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double a = result.analytic[p].data()[i];
      const double n = result.numeric[p].data()[i];
      const double abs_err = std::abs(a - n);
      const double rel = abs_err / std::max({std::abs(a), std::abs(n), floor});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error || std::isnan(rel)) {
        result.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        result.worst_param = p;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace lixp
