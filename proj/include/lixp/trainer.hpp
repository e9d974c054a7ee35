// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lixp/contextualizer.hpp"
#include "lixp/encoder.hpp"
#include "lixp/losses.hpp"
#include "lixp/parameters.hpp"

namespace lixp {

enum class Optimizer { sgd, adam_w };

Optimizer parse_optimizer(std::string_view s);
std::string_view to_string(Optimizer o);

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  /// 0 disables clipping.
  double grad_clip_norm = 1.0;
  std::size_t warmup_steps = 100;
  Optimizer optimizer = Optimizer::adam_w;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double tau_init = 10.0;
  double tau_ctx_init = 1.0;
  double bias_init = -10.0;
  std::size_t log_every = 10;

  void validate(const LixpConfig& lixp) const;
};

struct LogRecord {
  std::size_t step = 0;
  double base_term = 0.0;
  double ctx_term = 0.0;
  double total = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double tau_ctx = 0.0;
  double bias = 0.0;
  /// Global gradient norm before clipping.
  double grad_norm = 0.0;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

struct TrainLog {
  std::vector<LogRecord> records;

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

inline constexpr std::string_view kTrainLogHeader = "step,base_term,ctx_term,total,tau1,tau2,tau_ctx,bias,grad_norm";

std::string train_log_csv(const TrainLog& log);

/// Raised on a non-finite loss; carries the step and the last log record.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, std::optional<LogRecord> last, const std::string& msg)
      : std::runtime_error(msg), step_(step), last_(std::move(last)) {}
  [[nodiscard]] std::size_t step() const noexcept { return step_; }
  [[nodiscard]] const std::optional<LogRecord>& last_record() const noexcept { return last_; }

 private:
  std::size_t step_;
  std::optional<LogRecord> last_;
};

struct DualEncoder {
  Encoder image;
  Encoder text;

  DualEncoder(const EncoderConfig& image_cfg, const EncoderConfig& text_cfg)
      : image("image", image_cfg), text("text", text_cfg) {}
};

/// Encoder weights, temperatures and context parameters required by `lixp`.
ParameterStore init_model(const DualEncoder& model, const LixpConfig& lixp, const TrainConfig& train);

/// Adds any parameter `lixp` needs that `store` lacks (post-training resumes).
void complete_model(ParameterStore& store, const DualEncoder& model, const LixpConfig& lixp,
                    const TrainConfig& train);

struct TrainResult {
  ParameterStore params;
  TrainLog log;
};

/// Step: sample a batch with replacement, encode, lixp_loss, backward, clip
/// the global norm, update with linear warmup. Temperatures and bias are not
/// weight-decayed. `initial` resumes from existing parameters.
TrainResult train(const DualEncoder& model, const Array2& images, const Array2& texts, const LixpConfig& lixp,
                  const TrainConfig& cfg, std::optional<ParameterStore> initial = std::nullopt);

/// One run per tau_ctx initialization; everything else is shared.
std::vector<TrainLog> tau_ctx_sweep(const std::vector<double>& inits, const DualEncoder& model,
                                    const Array2& images, const Array2& texts, const LixpConfig& lixp,
                                    const TrainConfig& cfg);

/// Unit-norm embeddings under trained parameters.
Array2 embed_images(const DualEncoder& model, const ParameterStore& params, const Array2& images);
Array2 embed_texts(const DualEncoder& model, const ParameterStore& params, const Array2& texts);

}  // namespace lixp
