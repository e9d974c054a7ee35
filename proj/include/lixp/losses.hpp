// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

#include "lixp/autodiff.hpp"
#include "lixp/encoder.hpp"
#include "lixp/parameters.hpp"

namespace lixp {

/// Log-parameterized temperatures and the sigmoid-loss bias. Realized values
/// are exp(log_*), positive by construction.
struct TemperatureSet {
  ad::Var log_tau1;
  ad::Var log_tau2;
  ad::Var log_tau_ctx;
  ad::Var bias;

  [[nodiscard]] double tau1() const;
  [[nodiscard]] double tau2() const;
  [[nodiscard]] double tau_ctx() const;
};

/// Which learnable scalars are shared. Sharing is realized by binding several
/// slots of the TemperatureSet to the same parameter, never by branching in
/// the losses.
enum class TemperatureCoupling {
  independent,    // tau1, tau2, tau_ctx all separate
  tau1_tau2,      // tau1 == tau2
  tau2_ctx,       // tau2 == tau_ctx
  all_shared,     // one temperature for everything
};

TemperatureCoupling parse_coupling(std::string_view s);
std::string_view to_string(TemperatureCoupling c);

struct TemperatureInit {
  double tau1 = 10.0;
  double tau2 = 10.0;
  double tau_ctx = 1.0;
  double bias = -10.0;
};

namespace param_names {
inline constexpr std::string_view kLogTau1 = "temp.log_tau1";
inline constexpr std::string_view kLogTau2 = "temp.log_tau2";
inline constexpr std::string_view kLogTauCtx = "temp.log_tau_ctx";
inline constexpr std::string_view kBias = "temp.bias";
}  // namespace param_names

/// Adds only the parameters the coupling keeps distinct. Temperatures must be > 0.
void init_temperatures(ParameterStore& store, const TemperatureInit& init,
                       TemperatureCoupling coupling = TemperatureCoupling::independent);
TemperatureSet bind_temperatures(const BoundParameters& params,
                                 TemperatureCoupling coupling = TemperatureCoupling::independent);

enum class TauSlot { tau1, tau2 };

/// Sign convention of the pairwise sigmoid loss.
///   original: log(1 + exp(-z (tau s + b)))   (z = +1 on matched pairs, -1 otherwise)
///   literal:  log(1 + exp( z (-tau s + b)))  (the exponent exactly as typeset)
enum class SigmoidSign { original, literal };

SigmoidSign parse_sigmoid_sign(std::string_view s);
std::string_view to_string(SigmoidSign s);

/// Symmetric softmax cross-entropy over tau * (x_i . t_j), averaged over both
/// directions. Throws on an empty batch or mismatched shapes.
ad::Var clip_loss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const TemperatureSet& temps,
                  TauSlot which);

/// (1/|B|) sum_{i,j} of pairwise sigmoid terms over tau * (x_i . t_j) + b.
ad::Var siglip_loss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const TemperatureSet& temps,
                    TauSlot which, SigmoidSign sign = SigmoidSign::original);

enum class BaseLoss { clip, siglip };

BaseLoss parse_base_loss(std::string_view s);
std::string_view to_string(BaseLoss b);

ad::Var base_loss(BaseLoss kind, const EmbeddingBatch& images, const EmbeddingBatch& texts,
                  const TemperatureSet& temps, TauSlot which, SigmoidSign sign = SigmoidSign::original);

}  // namespace lixp
