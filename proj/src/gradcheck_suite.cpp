// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "lixp/contextualizer.hpp"
#include "lixp/gradcheck.hpp"
#include "lixp/losses.hpp"
#include "lixp/parameters.hpp"
#include "lixp/rng.hpp"
#include "lixp/trainer.hpp"

namespace lixp {

bool GradcheckSuiteResult::passed() const {
  return std::ranges::all_of(cases, [](const GradcheckCaseResult& c) { return c.passed; });
}

namespace {

Array2 uniform_array(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array2 a(rows, cols);
  for (double& v : a.data()) v = rng.uniform(lo, hi);
  return a;
}

Array2 self_mask(std::size_t n) {
  Array2 m(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 0.0;
  return m;
}

inline constexpr std::uint64_t kProbeStream = 0x70726f62;

/// sum(a * R) with fixed R: exercises every output entry with its own weight.
ad::Var probe(ad::Var a, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kProbeStream));
  return ad::sum(ad::mul(a, a.graph->constant(uniform_array(a.rows(), a.cols(), rng))));
}

struct Instance {
  LossBuilder build;
  std::vector<Array2> params;
  /// Parameters detached by construction; they must get zero gradient.
  std::vector<bool> frozen;
};

using InstanceFactory = std::function<Instance(std::uint64_t seed)>;

struct Outcome {
  double rel = 0.0;
  bool frozen_ok = true;
};

Outcome check_instance(const Instance& in, const GradcheckSuiteOptions& opt) {
  const GradcheckResult r = gradcheck(in.build, in.params, opt.h);
  Outcome o;
  for (std::size_t p = 0; p < in.params.size(); ++p) {
    const auto a = r.analytic[p].data();
    const auto n = r.numeric[p].data();
    const bool frozen = p < in.frozen.size() && in.frozen[p];
    double fd_sensitivity = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (frozen) {
        if (a[i] != 0.0) o.frozen_ok = false;
        fd_sensitivity = std::max(fd_sensitivity, std::abs(n[i]));
        continue;
      }
      const double denom = std::max({std::abs(a[i]), std::abs(n[i]), kGradcheckFloor});
      o.rel = std::max(o.rel, std::abs(a[i] - n[i]) / denom);
    }
    if (frozen && !(fd_sensitivity > 1e-8)) o.frozen_ok = false;
  }
  return o;
}

using UnaryOp = std::function<ad::Var(ad::Var)>;

InstanceFactory unary_case(UnaryOp op, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  return [=](std::uint64_t seed) {
    Rng rng(seed);
    return Instance{[op, seed](ad::Graph&, std::span<const ad::Var> v) { return probe(op(v[0]), seed); },
                    {uniform_array(rows, cols, rng, lo, hi)},
                    {}};
  };
}

InstanceFactory base_loss_case(BaseLoss kind, SigmoidSign sign) {
  return [=](std::uint64_t seed) {
    Rng rng(seed);
    Instance in;
    in.params = {uniform_array(8, 16, rng), uniform_array(8, 16, rng), Array2::scalar(rng.uniform(0.0, 2.0)),
                 Array2::scalar(rng.uniform(-3.0, 1.0))};
    in.build = [kind, sign](ad::Graph& g, std::span<const ad::Var> v) {
      const TemperatureSet temps{v[2], g.constant(Array2::scalar(0.0)), g.constant(Array2::scalar(0.0)), v[3]};
      return base_loss(kind, make_embedding(v[0]), make_embedding(v[1]), temps, TauSlot::tau1, sign);
    };
    return in;
  };
}

InstanceFactory contextualize_case(bool through_keys, bool through_values, bool masked, bool qk_normalized) {
  return [=](std::uint64_t seed) {
    Rng rng(seed);
    Instance in;
    in.params = {uniform_array(6, 8, rng), uniform_array(6, 8, rng), uniform_array(6, 8, rng),
                 Array2::scalar(rng.uniform(-1.0, 0.5))};
    in.frozen = {false, !through_keys, !through_values, false};
    in.build = [=](ad::Graph& g, std::span<const ad::Var> v) {
      const TemperatureSet temps{g.constant(Array2::scalar(0.0)), g.constant(Array2::scalar(0.0)), v[3],
                                 g.constant(Array2::scalar(0.0))};
      const ContextBuffer buf{ad::row_normalize(v[1]), v[2], masked ? self_mask(6) : Array2(6, 6, 1.0),
                              through_keys, through_values};
      return probe(contextualize(make_embedding(v[0]), buf, temps, qk_normalized).normalized, seed);
    };
    return in;
  };
}

/// Full objective through a small dual encoder; every stored parameter
/// (encoder weights, temperatures, value heads, inter-stage map) is a leaf.
InstanceFactory model_case(std::function<void(LixpConfig&)> configure, Nonlinearity nl = Nonlinearity::tanh) {
  return [=](std::uint64_t seed) {
    LixpConfig cfg;
    configure(cfg);
    Rng rng(seed);
    const std::size_t batch = 6, in_dim = 3, dim = 4;
    const DualEncoder model(EncoderConfig{in_dim, {5}, dim, nl, derive_seed(seed, stream::kInit, 0)},
                            EncoderConfig{in_dim, {5}, dim, nl, derive_seed(seed, stream::kInit, 1)});
    ParameterStore store;
    model.image.init_parameters(store);
    model.text.init_parameters(store);
    init_temperatures(store,
                      TemperatureInit{rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(0.3, 2.0),
                                      rng.uniform(-2.0, 0.0)},
                      cfg.coupling);
    init_context_parameters(store, cfg, dim, seed);
    // Move the inter-stage map off identity so its gradient is generic.
    for (auto& e : store.entries()) {
      if (e.name.rfind(param_names::kInterStage, 0) == 0) {
        for (double& w : e.value.data()) w += rng.uniform(-0.2, 0.2);
      }
    }
    const Array2 xin = uniform_array(batch, in_dim, rng);
    const Array2 tin = uniform_array(batch, in_dim, rng);
    Instance in;
    for (const auto& e : store.entries()) in.params.push_back(e.value);
    in.build = [model, store, cfg, xin, tin](ad::Graph& g, std::span<const ad::Var> v) {
      const BoundParameters bound(g, store, v);
      const EmbeddingBatch x = model.image.encode(bound, g.constant(xin));
      const EmbeddingBatch t = model.text.encode(bound, g.constant(tin));
      BufferInputs inputs;
      inputs.params = &bound;
      return lixp_loss(x, t, bind_temperatures(bound, cfg.coupling), cfg, inputs).total;
    };
    return in;
  };
}

InstanceFactory encoder_case(Nonlinearity nl) {
  return [=](std::uint64_t seed) {
    Rng rng(seed);
    const Encoder enc("enc", EncoderConfig{4, {6, 5}, 3, nl, derive_seed(seed, stream::kInit)});
    ParameterStore store;
    enc.init_parameters(store);
    const Array2 x = uniform_array(5, 4, rng);
    Instance in;
    for (const auto& e : store.entries()) in.params.push_back(e.value);
    in.build = [enc, store, x, seed](ad::Graph& g, std::span<const ad::Var> v) {
      const BoundParameters bound(g, store, v);
      return probe(enc.encode(bound, g.constant(x)).normalized, seed);
    };
    return in;
  };
}

struct Case {
  std::string name;
  InstanceFactory make;
};

std::vector<Case> all_cases() {
  std::vector<Case> c;
  c.push_back({"matmul", [](std::uint64_t seed) {
                 Rng rng(seed);
                 return Instance{[seed](ad::Graph&, std::span<const ad::Var> v) {
                                   return probe(ad::matmul(v[0], v[1]), seed);
                                 },
                                 {uniform_array(3, 4, rng), uniform_array(4, 2, rng)},
                                 {}};
               }});
  c.push_back({"row_normalize", unary_case([](ad::Var a) { return ad::row_normalize(a); }, 4, 3)});
  c.push_back({"masked_softmax", unary_case([](ad::Var a) { return ad::masked_softmax(a, self_mask(4)); }, 4, 4,
                                            -3.0, 3.0)});
  c.push_back({"log1p_exp", unary_case([](ad::Var a) { return ad::log1p_exp(a); }, 4, 3, -5.0, 5.0)});
  c.push_back({"row_logsumexp", unary_case([](ad::Var a) { return ad::row_logsumexp(a); }, 4, 5, -3.0, 3.0)});
  c.push_back({"layer_norm_rows", unary_case([](ad::Var a) { return ad::layer_norm_rows(a); }, 4, 5)});
  c.push_back({"tanh", unary_case([](ad::Var a) { return ad::tanh(a); }, 4, 3, -2.0, 2.0)});
  c.push_back({"exp_log", unary_case([](ad::Var a) { return ad::log(ad::add_scalar(ad::exp(a), a.graph->constant(Array2::scalar(0.5)))); }, 4, 3)});
  c.push_back({"clip_loss", base_loss_case(BaseLoss::clip, SigmoidSign::original)});
  c.push_back({"siglip_loss", base_loss_case(BaseLoss::siglip, SigmoidSign::original)});
  c.push_back({"siglip_loss_literal_sign", base_loss_case(BaseLoss::siglip, SigmoidSign::literal)});
  for (bool gk : {true, false}) {
    for (bool gv : {true, false}) {
      c.push_back({std::string("contextualize_keys_") + (gk ? "grad" : "frozen") + "_values_" +
                       (gv ? "grad" : "frozen"),
                   contextualize_case(gk, gv, true, true)});
    }
  }
  c.push_back({"contextualize_unmasked_raw_queries", contextualize_case(true, true, false, false)});
  c.push_back({"lixp_siglip", model_case([](LixpConfig&) {})});
  c.push_back({"lixp_clip", model_case([](LixpConfig& l) { l.base_loss = BaseLoss::clip; })});
  c.push_back({"lixp_residual", model_case([](LixpConfig& l) { l.variant = ContextVariant::residual; })});
  c.push_back(
      {"lixp_multimodal_values", model_case([](LixpConfig& l) { l.variant = ContextVariant::multimodal_values; })});
  c.push_back({"lixp_layernorm_buffers", model_case([](LixpConfig& l) {
                 l.layernorm_keys = true;
                 l.layernorm_values = true;
               })});
  c.push_back({"lixp_all_shared_temperatures",
               model_case([](LixpConfig& l) { l.coupling = TemperatureCoupling::all_shared; })});
  c.push_back({"two_stage_linear_psi", model_case([](LixpConfig& l) { l.variant = ContextVariant::two_stage; })});
  c.push_back({"two_stage_rebuilt_buffer", model_case([](LixpConfig& l) {
                 l.variant = ContextVariant::two_stage;
                 l.two_stage.rebuild_buffer = true;
               })});
  c.push_back({"value_head_linear", model_case([](LixpConfig& l) { l.value_head = ValueHead::linear; })});
  c.push_back({"value_head_mlp2", model_case([](LixpConfig& l) { l.value_head = ValueHead::mlp2; })});
  c.push_back({"value_head_mlp3", model_case([](LixpConfig& l) {
                 l.value_head = ValueHead::mlp3;
                 l.head_nonlinearity = Nonlinearity::relu;
               })});
  c.push_back({"encoder_tanh", encoder_case(Nonlinearity::tanh)});
  c.push_back({"encoder_relu", encoder_case(Nonlinearity::relu)});
  return c;
}

}  // namespace

GradcheckSuiteResult run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  GradcheckSuiteResult result;
  for (const Case& c : all_cases()) {
    GradcheckCaseResult r;
    r.name = c.name;
    r.seeds = options.seeds;
    for (std::uint64_t seed = 0; seed < options.seeds; ++seed) {
      const Outcome o = check_instance(c.make(derive_seed(seed, stream::kInit, 7)), options);
      if (o.rel > r.max_rel_error || std::isnan(o.rel)) {
        r.max_rel_error = o.rel;
        r.worst_seed = seed;
      }
      r.frozen_ok = r.frozen_ok && o.frozen_ok;
    }
    r.passed = r.frozen_ok && r.max_rel_error <= options.tolerance && !std::isnan(r.max_rel_error);
    result.cases.push_back(std::move(r));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace lixp
