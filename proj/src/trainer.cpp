// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/trainer.hpp"

#include <cmath>
#include <string>

#include "lixp/report.hpp"
#include "lixp/rng.hpp"

namespace lixp {

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam_w" || s == "adamw") return Optimizer::adam_w;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "' (expected sgd|adam_w)");
}

std::string_view to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam_w"; }

void TrainConfig::validate(const LixpConfig& lixp) const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (!(grad_clip_norm >= 0.0)) throw std::invalid_argument("TrainConfig: grad_clip_norm must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: adam betas must lie in [0, 1)");
  }
  if (!(tau_init > 0.0) || !(tau_ctx_init > 0.0)) {
    throw std::invalid_argument("TrainConfig: temperature inits must be > 0");
  }
  if (log_every == 0) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
  lixp.validate(batch_size);
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = std::string(kTrainLogHeader) + "\r\n";
  for (const LogRecord& r : log.records) {
    out += csv_row({std::to_string(r.step), format_double(r.base_term), format_double(r.ctx_term),
                    format_double(r.total), format_double(r.tau1), format_double(r.tau2), format_double(r.tau_ctx),
                    format_double(r.bias), format_double(r.grad_norm)});
  }
  return out;
}

namespace {

TemperatureInit temperature_init(const TrainConfig& cfg) {
  return TemperatureInit{cfg.tau_init, cfg.tau_init, cfg.tau_ctx_init, cfg.bias_init};
}

std::size_t output_dim(const DualEncoder& model) {
  if (model.image.config().output_dim != model.text.config().output_dim) {
    throw std::invalid_argument("image and text encoders must share output_dim");
  }
  return model.image.config().output_dim;
}

// The parameter realizing tau_ctx under the coupling.
std::string_view tau_ctx_param(TemperatureCoupling c) {
  switch (c) {
    case TemperatureCoupling::independent:
    case TemperatureCoupling::tau1_tau2: return param_names::kLogTauCtx;
    case TemperatureCoupling::tau2_ctx: return param_names::kLogTau2;
    case TemperatureCoupling::all_shared: return param_names::kLogTau1;
  }
  return param_names::kLogTauCtx;
}

bool is_scale_parameter(const std::string& name) { return name.rfind("temp.", 0) == 0; }

}  // namespace

void complete_model(ParameterStore& store, const DualEncoder& model, const LixpConfig& lixp,
                    const TrainConfig& train) {
  const std::size_t dim = output_dim(model);
  ParameterStore fresh;
  model.image.init_parameters(fresh);
  model.text.init_parameters(fresh);
  init_temperatures(fresh, temperature_init(train), lixp.coupling);
  init_context_parameters(fresh, lixp, dim, train.seed);
  for (auto& e : fresh.entries()) {
    if (!store.contains(e.name)) store.add(e.name, std::move(e.value));
  }
}

ParameterStore init_model(const DualEncoder& model, const LixpConfig& lixp, const TrainConfig& train) {
  ParameterStore store;
  complete_model(store, model, lixp, train);
  return store;
}

TrainResult train(const DualEncoder& model, const Array2& images, const Array2& texts, const LixpConfig& lixp,
                  const TrainConfig& cfg, std::optional<ParameterStore> initial) {
  cfg.validate(lixp);
  if (images.rows() != texts.rows() || images.rows() == 0) {
    throw std::invalid_argument("train: need matching non-empty image/text pools, got " +
                                std::to_string(images.rows()) + " and " + std::to_string(texts.rows()));
  }
  TrainResult result;
  if (initial) {
    result.params = std::move(*initial);
    complete_model(result.params, model, lixp, cfg);
  } else {
    result.params = init_model(model, lixp, cfg);
  }
  ParameterStore& params = result.params;
  if (cfg.steps == 0) return result;

  auto& entries = params.entries();
  std::vector<Array2> m1, m2;
  for (const auto& e : entries) {
    m1.emplace_back(e.value.rows(), e.value.cols());
    m2.emplace_back(e.value.rows(), e.value.cols());
  }
  const std::string frozen = lixp.freeze_tau_ctx ? std::string(tau_ctx_param(lixp.coupling)) : std::string();

  Rng batch_rng(derive_seed(cfg.seed, stream::kBatch));
  StaleBuffer stale(lixp.stale_buffer_size);
  const std::size_t n = images.rows();
  std::vector<std::size_t> idx(cfg.batch_size), ctx_idx;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& i : idx) i = batch_rng.below(n);
    if (lixp.separate_context_batch) {
      ctx_idx.resize(cfg.batch_size);
      for (auto& i : ctx_idx) i = batch_rng.below(n);
    }

    ad::Graph g;
    BoundParameters bound(g, params);
    const EmbeddingBatch x = model.image.encode(bound, g.constant(select_rows(images, idx)));
    const EmbeddingBatch t = model.text.encode(bound, g.constant(select_rows(texts, idx)));
    const TemperatureSet temps = bind_temperatures(bound, lixp.coupling);

    BufferInputs inputs;
    inputs.params = &bound;
    inputs.stale = lixp.stale_buffer_size > 0 ? &stale : nullptr;
    inputs.subset_seed = derive_seed(cfg.seed, stream::kBuffer, step);
    std::optional<EmbeddingBatch> cx, ct;
    if (lixp.separate_context_batch) {
      cx = model.image.encode(bound, g.constant(select_rows(images, ctx_idx)));
      ct = model.text.encode(bound, g.constant(select_rows(texts, ctx_idx)));
      inputs.context_images = &*cx;
      inputs.context_texts = &*ct;
    }

    const LixpLoss loss = lixp_loss(x, t, temps, lixp, inputs);
    LogRecord rec{step,          loss.base_term,  loss.ctx_term,    loss.total.value().item(),
                  temps.tau1(),  temps.tau2(),    temps.tau_ctx(),  temps.bias.value().item(),
                  0.0};
    if (!std::isfinite(rec.total)) {
      throw TrainingError(step, result.log.records.empty() ? std::nullopt
                                                           : std::optional<LogRecord>(result.log.records.back()),
                          "train: non-finite loss at step " + std::to_string(step));
    }

    g.backward(loss.total);
    std::vector<Array2> grads = bound.gradients();
    double sq = 0.0;
    for (const Array2& gr : grads) {
      for (double v : gr.data()) sq += v * v;
    }
    rec.grad_norm = std::sqrt(sq);
    if (cfg.grad_clip_norm > 0.0 && rec.grad_norm > cfg.grad_clip_norm) {
      const double s = cfg.grad_clip_norm / rec.grad_norm;
      for (Array2& gr : grads) {
        for (double& v : gr.data()) v *= s;
      }
    }

    const double warm = cfg.warmup_steps == 0
                            ? 1.0
                            : std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps));
    const double lr = cfg.learning_rate * warm;
    const double t1 = static_cast<double>(step + 1);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t1);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t1);
    for (std::size_t p = 0; p < entries.size(); ++p) {
      if (entries[p].name == frozen) continue;
      const double wd = is_scale_parameter(entries[p].name) ? 0.0 : cfg.weight_decay;
      const auto w = entries[p].value.data();
      const auto& gr = grads[p].data();
      if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (gr[i] + wd * w[i]);
        continue;
      }
      const auto a = m1[p].data();
      const auto b = m2[p].data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        a[i] = cfg.adam_beta1 * a[i] + (1.0 - cfg.adam_beta1) * gr[i];
        b[i] = cfg.adam_beta2 * b[i] + (1.0 - cfg.adam_beta2) * gr[i] * gr[i];
        const double update = (a[i] / bc1) / (std::sqrt(b[i] / bc2) + cfg.adam_eps);
        w[i] -= lr * (update + wd * w[i]);
      }
    }

    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) result.log.records.push_back(rec);
  }
  return result;
}

std::vector<TrainLog> tau_ctx_sweep(const std::vector<double>& inits, const DualEncoder& model,
                                    const Array2& images, const Array2& texts, const LixpConfig& lixp,
                                    const TrainConfig& cfg) {
  for (double v : inits) {
    if (!(v > 0.0)) throw std::invalid_argument("tau_ctx_sweep: inits must be > 0");
  }
  std::vector<TrainLog> logs;
  for (double v : inits) {
    TrainConfig run = cfg;
    run.tau_ctx_init = v;
    logs.push_back(train(model, images, texts, lixp, run).log);
  }
  return logs;
}

Array2 embed_images(const DualEncoder& model, const ParameterStore& params, const Array2& images) {
  return model.image.embed(params, images);
}

Array2 embed_texts(const DualEncoder& model, const ParameterStore& params, const Array2& texts) {
  return model.text.embed(params, texts);
}

}  // namespace lixp
