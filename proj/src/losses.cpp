// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lixp {

double TemperatureSet::tau1() const { return std::exp(log_tau1.value().item()); }
double TemperatureSet::tau2() const { return std::exp(log_tau2.value().item()); }
double TemperatureSet::tau_ctx() const { return std::exp(log_tau_ctx.value().item()); }

TemperatureCoupling parse_coupling(std::string_view s) {
  if (s == "independent") return TemperatureCoupling::independent;
  if (s == "tau1_tau2") return TemperatureCoupling::tau1_tau2;
  if (s == "tau2_ctx") return TemperatureCoupling::tau2_ctx;
  if (s == "all_shared") return TemperatureCoupling::all_shared;
  throw std::invalid_argument("unknown temperature coupling '" + std::string(s) +
                              "' (expected independent|tau1_tau2|tau2_ctx|all_shared)");
}

std::string_view to_string(TemperatureCoupling c) {
  switch (c) {
    case TemperatureCoupling::independent: return "independent";
    case TemperatureCoupling::tau1_tau2: return "tau1_tau2";
    case TemperatureCoupling::tau2_ctx: return "tau2_ctx";
    case TemperatureCoupling::all_shared: return "all_shared";
  }
  return "independent";
}

SigmoidSign parse_sigmoid_sign(std::string_view s) {
  if (s == "original") return SigmoidSign::original;
  if (s == "literal") return SigmoidSign::literal;
  throw std::invalid_argument("unknown sigmoid sign '" + std::string(s) + "' (expected original|literal)");
}

std::string_view to_string(SigmoidSign s) { return s == SigmoidSign::original ? "original" : "literal"; }

BaseLoss parse_base_loss(std::string_view s) {
  if (s == "clip") return BaseLoss::clip;
  if (s == "siglip") return BaseLoss::siglip;
  throw std::invalid_argument("unknown base loss '" + std::string(s) + "' (expected clip|siglip)");
}

std::string_view to_string(BaseLoss b) { return b == BaseLoss::clip ? "clip" : "siglip"; }

void init_temperatures(ParameterStore& store, const TemperatureInit& init, TemperatureCoupling coupling) {
  if (!(init.tau1 > 0.0) || !(init.tau2 > 0.0) || !(init.tau_ctx > 0.0)) {
    throw std::invalid_argument("init_temperatures: temperatures must be positive");
  }
  store.add(std::string(param_names::kLogTau1), Array2::scalar(std::log(init.tau1)));
  if (coupling == TemperatureCoupling::independent || coupling == TemperatureCoupling::tau2_ctx) {
    store.add(std::string(param_names::kLogTau2), Array2::scalar(std::log(init.tau2)));
  }
  if (coupling == TemperatureCoupling::independent || coupling == TemperatureCoupling::tau1_tau2) {
    store.add(std::string(param_names::kLogTauCtx), Array2::scalar(std::log(init.tau_ctx)));
  }
  store.add(std::string(param_names::kBias), Array2::scalar(init.bias));
}

TemperatureSet bind_temperatures(const BoundParameters& params, TemperatureCoupling coupling) {
  TemperatureSet t;
  t.log_tau1 = params[param_names::kLogTau1];
  t.bias = params[param_names::kBias];
  switch (coupling) {
    case TemperatureCoupling::independent:
      t.log_tau2 = params[param_names::kLogTau2];
      t.log_tau_ctx = params[param_names::kLogTauCtx];
      break;
    case TemperatureCoupling::tau1_tau2:
      t.log_tau2 = t.log_tau1;
      t.log_tau_ctx = params[param_names::kLogTauCtx];
      break;
    case TemperatureCoupling::tau2_ctx:
      t.log_tau2 = params[param_names::kLogTau2];
      t.log_tau_ctx = t.log_tau2;
      break;
    case TemperatureCoupling::all_shared:
      t.log_tau2 = t.log_tau1;
      t.log_tau_ctx = t.log_tau1;
      break;
  }
  return t;
}

namespace {

void check_pair(const EmbeddingBatch& images, const EmbeddingBatch& texts, const char* who) {
  if (images.rows() == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
  require_shape(images.normalized.value().same_shape(texts.normalized.value()), who,
                images.normalized.value(), texts.normalized.value());
}

ad::Var scaled_similarities(const EmbeddingBatch& images, const EmbeddingBatch& texts,
                            const TemperatureSet& temps, TauSlot which) {
  const ad::Var log_tau = which == TauSlot::tau1 ? temps.log_tau1 : temps.log_tau2;
  const ad::Var sims = ad::matmul(images.normalized, ad::transpose(texts.normalized));
  return ad::mul_scalar(sims, ad::exp(log_tau));
}

}  // namespace

ad::Var clip_loss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const TemperatureSet& temps,
                  TauSlot which) {
  check_pair(images, texts, "clip_loss");
  const auto batch = static_cast<double>(images.rows());
  const ad::Var logits = scaled_similarities(images, texts, temps, which);
  // -log softmax_row(i,i) - log softmax_col(i,i), summed over i
  const ad::Var image_to_text = ad::sum(ad::row_logsumexp(logits));
  const ad::Var text_to_image = ad::sum(ad::row_logsumexp(ad::transpose(logits)));
  const ad::Var matched = ad::sum(ad::diagonal(logits));
  const ad::Var total = ad::sub(ad::add(image_to_text, text_to_image), ad::scale(matched, 2.0));
  return ad::scale(total, 1.0 / (2.0 * batch));
}

ad::Var siglip_loss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const TemperatureSet& temps,
                    TauSlot which, SigmoidSign sign) {
  check_pair(images, texts, "siglip_loss");
  const std::size_t n = images.rows();
  ad::Graph& g = *images.raw.graph;
  const ad::Var scaled = scaled_similarities(images, texts, temps, which);
  // original: -z * (tau s + b); literal: z * (-tau s + b) = -z * (tau s - b)
  const ad::Var bias = sign == SigmoidSign::original ? temps.bias : ad::negate(temps.bias);
  const ad::Var logits = ad::add_scalar(scaled, bias);
  Array2 neg_z(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) neg_z(i, i) = -1.0;
  const ad::Var terms = ad::log1p_exp(ad::mul(logits, g.constant(std::move(neg_z))));
  return ad::scale(ad::sum(terms), 1.0 / static_cast<double>(n));
}

ad::Var base_loss(BaseLoss kind, const EmbeddingBatch& images, const EmbeddingBatch& texts,
                  const TemperatureSet& temps, TauSlot which, SigmoidSign sign) {
  return kind == BaseLoss::clip ? clip_loss(images, texts, temps, which)
                                : siglip_loss(images, texts, temps, which, sign);
}

}  // namespace lixp
