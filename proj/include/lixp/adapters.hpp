// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "lixp/array.hpp"

namespace lixp {

/// Labeled support embeddings (N classes, K shots) used for adaptation.
struct SupportSet {
  Array2 embeddings;      // (rows x d), unit-norm rows
  Array2 labels_onehot;   // (rows x N)
  std::vector<std::vector<std::size_t>> class_index;
  std::size_t num_classes = 0;
  /// Smallest per-class count (equal to K for stratified episodes).
  std::size_t shots = 0;

  /// Validates: every class has a row, labels in range, rows unit norm within 1e-9.
  static SupportSet from_labels(Array2 embeddings, const std::vector<int>& labels, std::size_t num_classes);
  [[nodiscard]] std::size_t rows() const noexcept { return embeddings.rows(); }
  [[nodiscard]] int label(std::size_t row) const;
};

struct PrototypeSet {
  Array2 prototypes;  // (N x d) per-class means, not re-normalized
};

/// Tip-Adapter hyperparameters: `mix` weights the cache term, `sharpness`
/// controls how quickly support affinity decays.
struct TipConfig {
  double mix = 1.0;
  double sharpness = 5.5;

  friend bool operator==(const TipConfig&, const TipConfig&) = default;
};

enum class Vote { plurality, softmax, rank };

Vote parse_vote(std::string_view s);
std::string_view to_string(Vote v);

struct NnConfig {
  std::size_t k = 32;          // capped at the support size
  double softmax_temp = 0.07;  // softmax voting temperature
  double rank_offset = 2.0;    // rank voting weight 1 / (offset + rank)
  Vote vote = Vote::softmax;
};

/// Cosine logits test * class_texts^T.
Array2 zero_shot_logits(const Array2& test, const Array2& class_texts);

/// Throws std::invalid_argument for a class without support rows.
PrototypeSet build_prototypes(const SupportSet& spt);
Array2 prototypical_logits(const Array2& test, const PrototypeSet& protos);

/// test T^T + mix * exp(-sharpness (1 - test X_spt^T)) L_spt.
Array2 tip_adapter_logits(const Array2& test, const SupportSet& spt, const Array2& class_texts,
                          const TipConfig& cfg = {});

/// mix in {0.5, 1, 2, 4} x sharpness in {1, 2.75, 5.5, 11}, mix-major.
std::vector<TipConfig> default_tip_grid();

/// Stratified k-fold selection by mean held-out accuracy; ties go to the
/// earliest grid entry. Falls back to grid.front() when no class has two rows.
TipConfig cv_tip_select(const SupportSet& spt, const Array2& class_texts, const std::vector<TipConfig>& grid,
                        std::size_t folds = 3, std::uint64_t seed = 0);

/// Weighted votes of the k' = min(k, rows) most similar supports. Neighbors
/// tied in similarity are ordered by support row index.
Array2 nn_vote_logits(const Array2& test, const SupportSet& spt, const NnConfig& cfg = {});

/// zero_shot_logits + mix_weight * softmax-voted nn_vote_logits.
Array2 snn_plus_zeroshot_logits(const Array2& test, const SupportSet& spt, const Array2& class_texts,
                                NnConfig cfg = {}, double mix_weight = 1.0);

/// Row-wise argmax; ties go to the smallest class index.
std::vector<int> predict(const Array2& logits);
double accuracy(const Array2& logits, const std::vector<int>& labels);

}  // namespace lixp
