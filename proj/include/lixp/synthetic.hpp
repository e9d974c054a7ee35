// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "lixp/array.hpp"

namespace lixp {

/// Desk-scale stand-in for paired image/text data. Each class has a latent
/// unit-norm center in image space and one deterministic text vector.
struct SyntheticTaskSpec {
  std::size_t num_classes = 8;
  std::size_t samples_per_class = 64;
  std::size_t image_dim = 32;
  std::size_t text_dim = 32;
  double class_separation = 5.0;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PairedData {
  Array2 images;             // (N * samples_per_class) x image_dim
  Array2 texts;              // same rows, text_dim columns; row i = class_texts row labels[i]
  std::vector<int> labels;   // class-major: all of class 0, then class 1, ...
  Array2 class_texts;        // N x text_dim
  Array2 class_centers;      // N x image_dim, unit rows
};

/// Image row i = class_center[label_i] * class_separation + N(0, noise_sigma^2 I).
/// Text vectors are one-hot when text_dim >= N, otherwise seeded unit
/// gaussian directions. Same spec, same output, bit for bit.
PairedData generate_pairs(const SyntheticTaskSpec& spec);

/// Row indices of each class in `labels`, in order of appearance.
std::vector<std::vector<std::size_t>> class_index(const std::vector<int>& labels,
                                                  std::size_t num_classes);

/// Per-class split of a generated dataset into train / support / test pools
/// by within-class position: the first `support_per_class` rows of each class
/// go to support, the next `test_per_class` to test, and the remainder to train.
struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> support;
  std::vector<std::size_t> test;
};

DataSplit split_by_class(const std::vector<int>& labels, std::size_t num_classes,
                         std::size_t support_per_class, std::size_t test_per_class);

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx);

}  // namespace lixp
