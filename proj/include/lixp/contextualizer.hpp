// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "lixp/autodiff.hpp"
#include "lixp/encoder.hpp"
#include "lixp/losses.hpp"
#include "lixp/parameters.hpp"

namespace lixp {

/// Key/value memory attended over by contextualize().
///
/// `mask` is (query rows x buffer rows); 0 excludes an entry from a query's
/// attention distribution. Keys are unit-norm rows unless QK normalization
/// is switched off; values are raw (non-normalized) representations.
struct ContextBuffer {
  ad::Var keys;
  ad::Var values;
  Array2 mask;
  bool grad_through_keys = true;
  bool grad_through_values = true;

  [[nodiscard]] std::size_t rows() const { return keys.rows(); }
};

enum class ContextVariant { single_stage, residual, two_stage, multimodal_values };
enum class ValueHead { none, linear, mlp2, mlp3 };
enum class InterStageMap { identity, linear };

ContextVariant parse_context_variant(std::string_view s);
std::string_view to_string(ContextVariant v);
ValueHead parse_value_head(std::string_view s);
std::string_view to_string(ValueHead v);
InterStageMap parse_inter_stage_map(std::string_view s);
std::string_view to_string(InterStageMap m);

struct TwoStageConfig {
  std::size_t stages = 2;
  InterStageMap map = InterStageMap::linear;
  /// false: every stage attends over the buffer built once from the batch.
  /// true: stage m > 1 attends over keys/values rebuilt from stage m-1 outputs.
  bool rebuild_buffer = false;
};

struct LixpConfig {
  /// false trains on the base loss alone; no buffer is built.
  bool contextual = true;
  double alpha = 0.9;
  BaseLoss base_loss = BaseLoss::siglip;
  SigmoidSign sigmoid_sign = SigmoidSign::original;
  ContextVariant variant = ContextVariant::single_stage;
  bool self_mask = true;
  bool qk_normalized = true;
  ValueHead value_head = ValueHead::none;
  Nonlinearity head_nonlinearity = Nonlinearity::tanh;
  bool layernorm_keys = false;
  bool layernorm_values = false;
  std::size_t stale_buffer_size = 0;
  /// nullopt = full batch.
  std::optional<std::size_t> active_buffer_subset;
  bool separate_context_batch = false;
  double residual_alpha = 0.9;
  bool grad_through_keys = true;
  bool grad_through_values = true;
  TwoStageConfig two_stage;
  TemperatureCoupling coupling = TemperatureCoupling::independent;
  bool freeze_tau_ctx = false;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate(std::size_t batch_size) const;
};

namespace param_names {
inline constexpr std::string_view kValueHead = "ctx.value_head";
inline constexpr std::string_view kInterStage = "ctx.psi";
}  // namespace param_names

/// Adds value-head and inter-stage parameters required by `cfg` (none for
/// the default configuration). The inter-stage linear map starts at identity.
void init_context_parameters(ParameterStore& store, const LixpConfig& cfg, std::size_t dim,
                             std::uint64_t seed);

/// FIFO of detached key/value rows from previous batches (stale entries).
class StaleBuffer {
 public:
  explicit StaleBuffer(std::size_t capacity) : capacity_(capacity) {}

  /// Appends rows and evicts the oldest beyond capacity.
  void push(const Array2& keys, const Array2& values);
  [[nodiscard]] std::size_t rows() const noexcept { return keys_.rows(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] const Array2& keys() const noexcept { return keys_; }
  [[nodiscard]] const Array2& values() const noexcept { return values_; }

 private:
  std::size_t capacity_;
  Array2 keys_;
  Array2 values_;
};

/// Optional inputs used by the buffer ablations.
struct BufferInputs {
  /// Needed for value heads and linear inter-stage maps.
  const BoundParameters* params = nullptr;
  /// Needed when stale_buffer_size > 0; build_in_batch_buffer pushes the
  /// current rows into it after reading the previous contents.
  StaleBuffer* stale = nullptr;
  /// Seed for the subset draw of this step.
  std::uint64_t subset_seed = 0;
  /// Needed when separate_context_batch is set.
  const EmbeddingBatch* context_images = nullptr;
  const EmbeddingBatch* context_texts = nullptr;
};

struct Contextualized {
  EmbeddingBatch embedding;
  /// Attention weights, (query rows x buffer rows).
  ad::Var weights;
};

/// raw = masked_softmax(Q K^T / (tau_ctx sqrt(d)), mask) V, normalized = row_normalize(raw).
/// Q is queries.normalized when `qk_normalized`, else queries.raw. Keys/values
/// flagged as frozen are detached before use.
Contextualized contextualize_with_weights(const EmbeddingBatch& queries, const ContextBuffer& buffer,
                                          const TemperatureSet& temps, bool qk_normalized = true);
EmbeddingBatch contextualize(const EmbeddingBatch& queries, const ContextBuffer& buffer,
                             const TemperatureSet& temps, bool qk_normalized = true);

/// Buffer over the current image batch: keys = normalized rows, values = raw
/// rows, self-entries masked when cfg.self_mask, with the configured
/// subset / stale / separate-batch / value-head / layer-norm / multimodal options.
ContextBuffer build_in_batch_buffer(const EmbeddingBatch& images, const EmbeddingBatch& texts,
                                    const LixpConfig& cfg, const BufferInputs& inputs = {});

/// x <- psi(contextualize(x, buffer)) repeated `stages` times.
EmbeddingBatch two_stage_contextualize(const EmbeddingBatch& queries, const ContextBuffer& buffer,
                                       const TemperatureSet& temps, const TwoStageConfig& ts,
                                       const BoundParameters* params = nullptr, bool qk_normalized = true);

struct LixpLoss {
  ad::Var total;
  /// Detached values for logging.
  double base_term = 0.0;
  double ctx_term = 0.0;
};

/// alpha * L(X, T, tau1) + (1 - alpha) * L(X_ctx, T, tau2); the residual
/// variant instead trains L(normalize(r x + (1 - r) x_ctx), T, tau1).
LixpLoss lixp_loss(const EmbeddingBatch& images, const EmbeddingBatch& texts, const TemperatureSet& temps,
                   const LixpConfig& cfg, const BufferInputs& inputs = {});

}  // namespace lixp
