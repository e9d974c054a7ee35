// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/synthetic.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "lixp/rng.hpp"

namespace lixp {

void SyntheticTaskSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("SyntheticTaskSpec: num_classes must be >= 2");
  if (image_dim == 0 || text_dim == 0) {
    throw std::invalid_argument("SyntheticTaskSpec: image_dim and text_dim must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("SyntheticTaskSpec: noise_sigma must be >= 0");
}

namespace {

Array2 gaussian_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Array2 out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double n = 0.0;
    while (n == 0.0) {
      for (double& v : out.row(i)) v = rng.normal();
      n = norm(out.row(i));
    }
    for (double& v : out.row(i)) v /= n;
  }
  return out;
}

}  // namespace

PairedData generate_pairs(const SyntheticTaskSpec& spec) {
  spec.validate();
  PairedData out;
  Rng center_rng(derive_seed(spec.seed, stream::kData, 0));
  out.class_centers = gaussian_unit_rows(spec.num_classes, spec.image_dim, center_rng);

  if (spec.text_dim >= spec.num_classes) {
    out.class_texts = Array2(spec.num_classes, spec.text_dim);
    for (std::size_t c = 0; c < spec.num_classes; ++c) out.class_texts(c, c) = 1.0;
  } else {
    Rng text_rng(derive_seed(spec.seed, stream::kData, 1));
    out.class_texts = gaussian_unit_rows(spec.num_classes, spec.text_dim, text_rng);
  }

  const std::size_t n = spec.num_classes * spec.samples_per_class;
  out.images = Array2(n, spec.image_dim);
  out.texts = Array2(n, spec.text_dim);
  out.labels.resize(n);
  Rng noise_rng(derive_seed(spec.seed, stream::kData, 2));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i / spec.samples_per_class;
    out.labels[i] = static_cast<int>(c);
    auto img = out.images.row(i);
    const auto center = out.class_centers.row(c);
    for (std::size_t j = 0; j < spec.image_dim; ++j) {
      img[j] = center[j] * spec.class_separation + spec.noise_sigma * noise_rng.normal();
    }
    std::ranges::copy(out.class_texts.row(c), out.texts.row(i).begin());
  }
  return out;
}

std::vector<std::vector<std::size_t>> class_index(const std::vector<int>& labels,
                                                  std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> idx(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::out_of_range("class_index: label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    idx[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return idx;
}

DataSplit split_by_class(const std::vector<int>& labels, std::size_t num_classes,
                         std::size_t support_per_class, std::size_t test_per_class) {
  DataSplit split;
  const auto per_class = class_index(labels, num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& rows = per_class[c];
    if (rows.size() < support_per_class + test_per_class) {
      throw std::invalid_argument("split_by_class: class " + std::to_string(c) + " has " +
                                  std::to_string(rows.size()) + " rows, need " +
                                  std::to_string(support_per_class + test_per_class));
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k < support_per_class) {
        split.support.push_back(rows[k]);
      } else if (k < support_per_class + test_per_class) {
        split.test.push_back(rows[k]);
      } else {
        split.train.push_back(rows[k]);
      }
    }
  }
  return split;
}

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels.at(i));
  return out;
}

}  // namespace lixp
