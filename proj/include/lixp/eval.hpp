// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lixp/adapters.hpp"
#include "lixp/array.hpp"

namespace lixp {

enum class Method { zero_shot, prototypical, tip_adapter, cv_tip, nn_plurality, nn_softmax, nn_rank, snn_zero_shot };

Method parse_method(std::string_view s);
std::string_view to_string(Method m);

struct ClassifierConfig {
  Method method = Method::zero_shot;
  TipConfig tip;
  NnConfig nn;
  double mix_weight = 1.0;
  std::size_t cv_folds = 3;
  std::vector<TipConfig> cv_grid = default_tip_grid();
};

/// Logits of one classifier; `seed` only matters for cv_tip.
Array2 classify(const ClassifierConfig& c, const Array2& test, const SupportSet* spt, const Array2& class_texts,
                std::uint64_t seed);

struct LabeledPool {
  Array2 embeddings;
  std::vector<int> labels;
};

struct EpisodeSpec {
  LabeledPool support_pool;
  LabeledPool test_pool;
  Array2 class_texts;  // row c = class c
  std::vector<std::size_t> shots{1};
  std::size_t num_episodes = 5;
  std::uint64_t seed = 0;
  std::vector<ClassifierConfig> classifiers;
  /// Worker threads; results are identical for any value.
  std::size_t threads = 1;
};

struct ResultRow {
  std::string classifier;
  std::size_t shots = 0;
  std::size_t episode = 0;
  std::size_t num_classes = 0;
  double accuracy = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct Aggregate {
  std::string classifier;
  std::size_t shots = 0;
  std::size_t num_classes = 0;
  std::size_t episodes = 0;
  double mean = 0.0;
  /// Sample standard deviation; 0 for a single episode.
  double stddev = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  /// One entry per (classifier, shots) in first-appearance order.
  [[nodiscard]] std::vector<Aggregate> aggregates() const;
  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_json() const;
  /// Parses the per-episode CSV written by to_csv().
  static ResultTable from_csv(std::string_view text);

  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

/// Imports a LIXPEMB1 file with labels and renormalizes rows in 64-bit.
LabeledPool load_labeled_pool(const std::string& path);
/// Imports class text embeddings (row c = class c) and renormalizes rows.
/// Labels, when present, must be 0..N-1 in order.
Array2 load_class_texts(const std::string& path);

/// Each episode draws K supports per class (seeded, without replacement)
/// and scores every classifier on the full test pool. K = 0 yields
/// zero-shot rows only.
ResultTable run_episodes(const EpisodeSpec& spec);

/// Draws the support rows of one episode: K per class, class-major.
std::vector<std::size_t> sample_support(const std::vector<int>& labels, std::size_t num_classes, std::size_t shots,
                                        std::uint64_t seed);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of gain on log10(num_examples). Throws
/// std::domain_error when all example counts coincide.
LinearFit relative_gain_fit(const std::vector<std::pair<double, double>>& points);

struct GainCell {
  std::string classifier;
  std::size_t shots = 0;
  std::size_t num_classes = 0;
  double baseline = 0.0;
  double contextual = 0.0;
  double absolute_gain = 0.0;
  double relative_gain = 0.0;
  /// shots x num_classes.
  std::size_t num_examples = 0;
};

struct GainReport {
  std::vector<GainCell> cells;
  /// Fit over cells with shots > 0; absent with fewer than two distinct counts.
  std::optional<LinearFit> fit;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_json() const;
};

/// Throws std::invalid_argument when the (classifier, shots) grids differ.
GainReport compare_runs(const ResultTable& baseline, const ResultTable& contextual);

}  // namespace lixp
