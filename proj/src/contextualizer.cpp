// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/contextualizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lixp/rng.hpp"

namespace lixp {

ContextVariant parse_context_variant(std::string_view s) {
  if (s == "single_stage") return ContextVariant::single_stage;
  if (s == "residual") return ContextVariant::residual;
  if (s == "two_stage") return ContextVariant::two_stage;
  if (s == "multimodal_values") return ContextVariant::multimodal_values;
  throw std::invalid_argument("unknown context variant '" + std::string(s) +
                              "' (expected single_stage|residual|two_stage|multimodal_values)");
}

std::string_view to_string(ContextVariant v) {
  switch (v) {
    case ContextVariant::single_stage: return "single_stage";
    case ContextVariant::residual: return "residual";
    case ContextVariant::two_stage: return "two_stage";
    case ContextVariant::multimodal_values: return "multimodal_values";
  }
  return "single_stage";
}

ValueHead parse_value_head(std::string_view s) {
  if (s == "none") return ValueHead::none;
  if (s == "linear") return ValueHead::linear;
  if (s == "mlp2") return ValueHead::mlp2;
  if (s == "mlp3") return ValueHead::mlp3;
  throw std::invalid_argument("unknown value head '" + std::string(s) + "' (expected none|linear|mlp2|mlp3)");
}

std::string_view to_string(ValueHead v) {
  switch (v) {
    case ValueHead::none: return "none";
    case ValueHead::linear: return "linear";
    case ValueHead::mlp2: return "mlp2";
    case ValueHead::mlp3: return "mlp3";
  }
  return "none";
}

InterStageMap parse_inter_stage_map(std::string_view s) {
  if (s == "identity") return InterStageMap::identity;
  if (s == "linear") return InterStageMap::linear;
  throw std::invalid_argument("unknown inter-stage map '" + std::string(s) + "' (expected identity|linear)");
}

std::string_view to_string(InterStageMap m) { return m == InterStageMap::identity ? "identity" : "linear"; }

void LixpConfig::validate(std::size_t batch_size) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("LixpConfig: alpha must lie in [0, 1]");
  if (!(residual_alpha >= 0.0 && residual_alpha <= 1.0)) {
    throw std::invalid_argument("LixpConfig: residual_alpha must lie in [0, 1]");
  }
  if (!contextual) return;
  if (active_buffer_subset) {
    if (*active_buffer_subset == 0) throw std::invalid_argument("LixpConfig: active_buffer_subset must be >= 1");
    if (*active_buffer_subset > batch_size) {
      throw std::invalid_argument("LixpConfig: active_buffer_subset " + std::to_string(*active_buffer_subset) +
                                  " exceeds batch size " + std::to_string(batch_size));
    }
  }
  if (self_mask && !separate_context_batch && batch_size < 2) {
    throw std::invalid_argument("LixpConfig: self-masked contextualization needs batch size >= 2");
  }
  if (variant == ContextVariant::two_stage && two_stage.stages == 0) {
    throw std::invalid_argument("LixpConfig: two_stage.stages must be >= 1");
  }
}

namespace {

std::size_t head_layers(ValueHead h) {
  switch (h) {
    case ValueHead::none: return 0;
    case ValueHead::linear: return 1;
    case ValueHead::mlp2: return 2;
    case ValueHead::mlp3: return 3;
  }
  return 0;
}

DenseStack value_head_stack(const LixpConfig& cfg, std::size_t dim) {
  return DenseStack{std::string(param_names::kValueHead), dim,
                    std::vector<std::size_t>(head_layers(cfg.value_head), dim), cfg.head_nonlinearity};
}

DenseStack inter_stage_stack(std::size_t dim) {
  return DenseStack{std::string(param_names::kInterStage), dim, {dim}, Nonlinearity::tanh};
}

}  // namespace

void init_context_parameters(ParameterStore& store, const LixpConfig& cfg, std::size_t dim,
                             std::uint64_t seed) {
  if (cfg.value_head != ValueHead::none) {
    value_head_stack(cfg, dim).init_parameters(store, derive_seed(seed, stream::kInit, 101));
  }
  if (cfg.variant == ContextVariant::two_stage && cfg.two_stage.map == InterStageMap::linear) {
    const std::string prefix(param_names::kInterStage);
    store.add(prefix + ".w0", Array2::identity(dim));
    store.add(prefix + ".b0", Array2(1, dim));
  }
}

void StaleBuffer::push(const Array2& keys, const Array2& values) {
  require_shape(keys.same_shape(values), "StaleBuffer::push", keys, values);
  if (capacity_ == 0) return;
  keys_ = concat_rows(keys_, keys);
  values_ = concat_rows(values_, values);
  if (keys_.rows() > capacity_) {
    std::vector<std::size_t> keep;
    for (std::size_t i = keys_.rows() - capacity_; i < keys_.rows(); ++i) keep.push_back(i);
    keys_ = select_rows(keys_, keep);
    values_ = select_rows(values_, keep);
  }
}

Contextualized contextualize_with_weights(const EmbeddingBatch& queries, const ContextBuffer& buffer,
                                          const TemperatureSet& temps, bool qk_normalized) {
  {
    // References into the graph are only valid until the next node is recorded.
    const Array2& k = buffer.keys.value();
    const Array2& v = buffer.values.value();
    require_shape(k.same_shape(v), "contextualize: keys vs values", k, v);
    require_shape(queries.dim() == k.cols(), "contextualize: queries vs keys", queries.raw.value(), k);
    if (buffer.mask.rows() != queries.rows() || buffer.mask.cols() != k.rows()) {
      throw DimensionError("contextualize: mask " + buffer.mask.shape_string() + " but expected " +
                           std::to_string(queries.rows()) + "x" + std::to_string(k.rows()));
    }
  }
  const std::size_t dim = buffer.keys.cols();
  const ad::Var keys = buffer.grad_through_keys ? buffer.keys : ad::detach(buffer.keys);
  const ad::Var values = buffer.grad_through_values ? buffer.values : ad::detach(buffer.values);
  const ad::Var q = qk_normalized ? queries.normalized : queries.raw;

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  const ad::Var sims = ad::scale(ad::matmul(q, ad::transpose(keys)), inv_sqrt_d);
  const ad::Var scores = ad::mul_scalar(sims, ad::exp(ad::negate(temps.log_tau_ctx)));
  const ad::Var weights = ad::masked_softmax(scores, buffer.mask);
  return Contextualized{make_embedding(ad::matmul(weights, values)), weights};
}

EmbeddingBatch contextualize(const EmbeddingBatch& queries, const ContextBuffer& buffer,
                             const TemperatureSet& temps, bool qk_normalized) {
  return contextualize_with_weights(queries, buffer, temps, qk_normalized).embedding;
}

ContextBuffer build_in_batch_buffer(const EmbeddingBatch& images, const EmbeddingBatch& texts,
                                    const LixpConfig& cfg, const BufferInputs& inputs) {
  const bool separate = cfg.separate_context_batch;
  if (separate && (inputs.context_images == nullptr ||
                   (cfg.variant == ContextVariant::multimodal_values && inputs.context_texts == nullptr))) {
    throw std::invalid_argument("build_in_batch_buffer: separate_context_batch needs a context batch");
  }
  const EmbeddingBatch& src_images = separate ? *inputs.context_images : images;
  const EmbeddingBatch& src_texts = separate && inputs.context_texts ? *inputs.context_texts : texts;
  const std::size_t n_queries = images.rows();
  const std::size_t n_source = src_images.rows();

  if (!separate && cfg.self_mask && n_queries < 2) {
    throw std::invalid_argument("build_in_batch_buffer: batch size 1 with self-masking leaves nothing to attend to");
  }

  std::vector<std::size_t> rows;
  if (cfg.active_buffer_subset) {
    const std::size_t s = *cfg.active_buffer_subset;
    if (s == 0) throw std::invalid_argument("build_in_batch_buffer: subset size 0");
    if (s > n_source) {
      throw std::invalid_argument("build_in_batch_buffer: subset " + std::to_string(s) + " exceeds " +
                                  std::to_string(n_source) + " rows");
    }
    Rng rng(inputs.subset_seed);
    rows = rng.sample_without_replacement(n_source, s);
  } else {
    rows.resize(n_source);
    for (std::size_t i = 0; i < n_source; ++i) rows[i] = i;
  }

  ad::Var keys = cfg.qk_normalized ? src_images.normalized : src_images.raw;
  if (cfg.layernorm_keys) {
    keys = ad::layer_norm_rows(src_images.raw);
    if (cfg.qk_normalized) keys = ad::row_normalize(keys);
  }
  ad::Var values = cfg.variant == ContextVariant::multimodal_values ? src_texts.raw : src_images.raw;
  require_shape(values.cols() == keys.cols(), "build_in_batch_buffer: values vs keys", values.value(),
                keys.value());
  if (cfg.layernorm_values) values = ad::layer_norm_rows(values);
  if (cfg.active_buffer_subset) {
    keys = ad::select_rows(keys, rows);
    values = ad::select_rows(values, rows);
  }
  if (cfg.value_head != ValueHead::none) {
    if (inputs.params == nullptr) throw std::invalid_argument("build_in_batch_buffer: value head needs parameters");
    values = value_head_stack(cfg, values.cols()).forward(*inputs.params, values);
  }

  Array2 mask(n_queries, rows.size(), 1.0);
  if (!separate && cfg.self_mask) {
    for (std::size_t j = 0; j < rows.size(); ++j) mask(rows[j], j) = 0.0;
  }

  ContextBuffer buffer{keys, values, std::move(mask), cfg.grad_through_keys, cfg.grad_through_values};

  if (cfg.stale_buffer_size > 0) {
    if (inputs.stale == nullptr) throw std::invalid_argument("build_in_batch_buffer: stale buffer state missing");
    StaleBuffer& stale = *inputs.stale;
    const Array2 fresh_keys = keys.value();
    const Array2 fresh_values = values.value();
    if (stale.rows() > 0) {
      ad::Graph& g = *keys.graph;
      buffer.keys = ad::concat_rows(buffer.keys, g.constant(stale.keys()));
      buffer.values = ad::concat_rows(buffer.values, g.constant(stale.values()));
      Array2 extended(n_queries, rows.size() + stale.rows(), 1.0);
      for (std::size_t i = 0; i < n_queries; ++i) {
        for (std::size_t j = 0; j < rows.size(); ++j) extended(i, j) = buffer.mask(i, j);
      }
      buffer.mask = std::move(extended);
    }
    stale.push(fresh_keys, fresh_values);
  }

  for (std::size_t i = 0; i < buffer.mask.rows(); ++i) {
    bool any = false;
    for (double m : buffer.mask.row(i)) any = any || m == 1.0;
    if (!any) {
      throw std::invalid_argument("build_in_batch_buffer: query " + std::to_string(i) +
                                  " has no unmasked buffer entry");
    }
  }
  return buffer;
}

EmbeddingBatch two_stage_contextualize(const EmbeddingBatch& queries, const ContextBuffer& buffer,
                                       const TemperatureSet& temps, const TwoStageConfig& ts,
                                       const BoundParameters* params, bool qk_normalized) {
  if (ts.stages == 0) throw std::invalid_argument("two_stage_contextualize: stages must be >= 1");
  if (ts.map == InterStageMap::linear && params == nullptr) {
    throw std::invalid_argument("two_stage_contextualize: linear map needs parameters");
  }
  const DenseStack psi = inter_stage_stack(queries.dim());
  ContextBuffer current = buffer;
  EmbeddingBatch x = queries;
  for (std::size_t m = 0; m < ts.stages; ++m) {
    if (m > 0 && ts.rebuild_buffer) {
      if (current.mask.rows() != current.mask.cols()) {
        throw std::invalid_argument("two_stage_contextualize: rebuilding needs a square in-batch mask");
      }
      current.keys = qk_normalized ? x.normalized : x.raw;
      current.values = x.raw;
    }
    EmbeddingBatch out = contextualize(x, current, temps, qk_normalized);
    if (ts.map == InterStageMap::linear) out = make_embedding(psi.forward(*params, out.raw));
    x = out;
  }
  return x;
}

LixpLoss lixp_loss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const TemperatureSet& temps,
                   const LixpConfig& cfg, const BufferInputs& inputs) {
  cfg.validate(images.rows());
  LixpLoss out;
  const ad::Var base = base_loss(cfg.base_loss, images, texts, temps, TauSlot::tau1, cfg.sigmoid_sign);
  out.base_term = base.value().item();
  if (!cfg.contextual) {
    out.total = base;
    out.ctx_term = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  const ContextBuffer buffer = build_in_batch_buffer(images, texts, cfg, inputs);
  const EmbeddingBatch ctx =
      cfg.variant == ContextVariant::two_stage
          ? two_stage_contextualize(images, buffer, temps, cfg.two_stage, inputs.params, cfg.qk_normalized)
          : contextualize(images, buffer, temps, cfg.qk_normalized);

  if (cfg.variant == ContextVariant::residual) {
    const ad::Var mixed = ad::add(ad::scale(images.normalized, cfg.residual_alpha),
                                  ad::scale(ctx.normalized, 1.0 - cfg.residual_alpha));
    const ad::Var loss =
        base_loss(cfg.base_loss, make_embedding(mixed), texts, temps, TauSlot::tau1, cfg.sigmoid_sign);
    out.total = loss;
    out.ctx_term = loss.value().item();
    return out;
  }

  const ad::Var ctx_loss = base_loss(cfg.base_loss, ctx, texts, temps, TauSlot::tau2, cfg.sigmoid_sign);
  out.ctx_term = ctx_loss.value().item();
  if (cfg.alpha == 1.0) {
    out.total = base;
  } else if (cfg.alpha == 0.0) {
    out.total = ctx_loss;
  } else {
    out.total = ad::add(ad::scale(base, cfg.alpha), ad::scale(ctx_loss, 1.0 - cfg.alpha));
  }
  return out;
}

}  // namespace lixp
