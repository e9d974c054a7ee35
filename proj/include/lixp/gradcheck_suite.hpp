// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lixp {

struct GradcheckSuiteOptions {
  std::size_t seeds = 20;
  double tolerance = 1e-4;
  double h = 1e-5;
};

struct GradcheckCaseResult {
  std::string name;
  std::size_t seeds = 0;
  /// Worst relative error over seeds and trainable coordinates.
  double max_rel_error = 0.0;
  std::uint64_t worst_seed = 0;
  /// Stop-gradient cases: frozen inputs got exactly zero backward gradient
  /// while their finite-difference sensitivity was nonzero. True elsewhere.
  bool frozen_ok = true;
  bool passed = false;
};

struct GradcheckSuiteResult {
  std::vector<GradcheckCaseResult> cases;
  double seconds = 0.0;
  [[nodiscard]] bool passed() const;
};

/// Central finite-difference checks of every differentiable operation:
/// autodiff primitives, both base losses, contextualization under all
/// stop-gradient settings, the combined objective and its variants, the
/// two-stage map, value heads and encoders.
GradcheckSuiteResult run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

}  // namespace lixp
