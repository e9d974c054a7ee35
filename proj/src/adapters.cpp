// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lixp/rng.hpp"

namespace lixp {

Vote parse_vote(std::string_view s) {
  if (s == "plurality") return Vote::plurality;
  if (s == "softmax") return Vote::softmax;
  if (s == "rank") return Vote::rank;
  throw std::invalid_argument("unknown vote '" + std::string(s) + "' (expected plurality|softmax|rank)");
}

std::string_view to_string(Vote v) {
  switch (v) {
    case Vote::plurality: return "plurality";
    case Vote::softmax: return "softmax";
    case Vote::rank: return "rank";
  }
  return "softmax";
}

SupportSet SupportSet::from_labels(Array2 embeddings, const std::vector<int>& labels, std::size_t num_classes) {
  if (labels.size() != embeddings.rows()) {
    throw std::invalid_argument("SupportSet: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(embeddings.rows()) + " rows");
  }
  if (num_classes == 0) throw std::invalid_argument("SupportSet: num_classes must be positive");
  SupportSet s;
  s.num_classes = num_classes;
  s.class_index.assign(num_classes, {});
  s.labels_onehot = Array2(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::invalid_argument("SupportSet: label " + std::to_string(labels[i]) + " out of range");
    }
    const auto c = static_cast<std::size_t>(labels[i]);
    s.labels_onehot(i, c) = 1.0;
    s.class_index[c].push_back(i);
    if (std::abs(norm(embeddings.row(i)) - 1.0) > 1e-9) {
      throw std::invalid_argument("SupportSet: row " + std::to_string(i) + " is not unit norm");
    }
  }
  s.shots = labels.empty() ? 0 : labels.size();
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (s.class_index[c].empty()) {
      throw std::invalid_argument("SupportSet: class " + std::to_string(c) + " has no support rows");
    }
    s.shots = std::min(s.shots, s.class_index[c].size());
  }
  s.embeddings = std::move(embeddings);
  return s;
}

int SupportSet::label(std::size_t row) const {
  const auto r = labels_onehot.row(row);
  return static_cast<int>(std::ranges::max_element(r) - r.begin());
}

Array2 zero_shot_logits(const Array2& test, const Array2& class_texts) {
  require_shape(test.cols() == class_texts.cols(), "zero_shot_logits", test, class_texts);
  return matmul_nt(test, class_texts);
}

PrototypeSet build_prototypes(const SupportSet& spt) {
  PrototypeSet p{Array2(spt.num_classes, spt.embeddings.cols())};
  for (std::size_t c = 0; c < spt.num_classes; ++c) {
    const auto& rows = spt.class_index.at(c);
    if (rows.empty()) throw std::invalid_argument("build_prototypes: class " + std::to_string(c) + " is empty");
    auto out = p.prototypes.row(c);
    for (std::size_t r : rows) {
      const auto x = spt.embeddings.row(r);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += x[j];
    }
    for (double& v : out) v /= static_cast<double>(rows.size());
  }
  return p;
}

Array2 prototypical_logits(const Array2& test, const PrototypeSet& protos) {
  require_shape(test.cols() == protos.prototypes.cols(), "prototypical_logits", test, protos.prototypes);
  return matmul_nt(test, protos.prototypes);
}

namespace {

Array2 tip_logits_raw(const Array2& test, const Array2& spt_embeddings, const Array2& spt_onehot,
                      const Array2& class_texts, const TipConfig& cfg) {
  require_shape(test.cols() == spt_embeddings.cols(), "tip_adapter_logits: test vs support", test, spt_embeddings);
  Array2 logits = zero_shot_logits(test, class_texts);
  require_shape(spt_onehot.cols() == logits.cols(), "tip_adapter_logits: labels vs texts", spt_onehot, class_texts);
  if (cfg.mix == 0.0 || spt_embeddings.rows() == 0) return logits;
  Array2 affinity = matmul_nt(test, spt_embeddings);
  for (double& a : affinity.data()) a = std::exp(-cfg.sharpness * (1.0 - a));
  const Array2 cache = matmul(affinity, spt_onehot);
  for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] += cfg.mix * cache.data()[i];
  return logits;
}

}  // namespace

Array2 tip_adapter_logits(const Array2& test, const SupportSet& spt, const Array2& class_texts,
                          const TipConfig& cfg) {
  if (!(cfg.sharpness > 0.0)) throw std::invalid_argument("tip_adapter_logits: sharpness must be positive");
  return tip_logits_raw(test, spt.embeddings, spt.labels_onehot, class_texts, cfg);
}

std::vector<TipConfig> default_tip_grid() {
  std::vector<TipConfig> grid;
  for (double mix : {0.5, 1.0, 2.0, 4.0}) {
    for (double sharpness : {1.0, 2.75, 5.5, 11.0}) grid.push_back(TipConfig{mix, sharpness});
  }
  return grid;
}

TipConfig cv_tip_select(const SupportSet& spt, const Array2& class_texts, const std::vector<TipConfig>& grid,
                        std::size_t folds, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("cv_tip_select: empty grid");
  if (folds < 2) throw std::invalid_argument("cv_tip_select: folds must be >= 2");
  if (grid.size() == 1) return grid.front();

  std::size_t largest = 0;
  for (const auto& rows : spt.class_index) largest = std::max(largest, rows.size());
  const std::size_t effective = std::min(folds, largest);
  if (effective < 2) return grid.front();

  // Stratified split: shuffle each class, deal its rows round-robin.
  Rng rng(derive_seed(seed, stream::kFolds));
  std::vector<std::size_t> fold_of(spt.rows());
  for (const auto& rows : spt.class_index) {
    std::vector<std::size_t> shuffled = rows;
    rng.shuffle(shuffled);
    for (std::size_t p = 0; p < shuffled.size(); ++p) fold_of[shuffled[p]] = p % effective;
  }

  struct Fold {
    Array2 train_x, train_l, held_x;
    std::vector<int> held_labels;
  };
  std::vector<Fold> split;
  for (std::size_t f = 0; f < effective; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t r = 0; r < spt.rows(); ++r) (fold_of[r] == f ? held : train).push_back(r);
    if (held.empty()) continue;
    Fold fold{select_rows(spt.embeddings, train), select_rows(spt.labels_onehot, train),
              select_rows(spt.embeddings, held), {}};
    for (std::size_t r : held) fold.held_labels.push_back(spt.label(r));
    split.push_back(std::move(fold));
  }

  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    double score = 0.0;
    for (const auto& fold : split) {
      score += accuracy(tip_logits_raw(fold.held_x, fold.train_x, fold.train_l, class_texts, grid[gi]),
                        fold.held_labels);
    }
    score /= static_cast<double>(split.size());
    if (score > best_score) {
      best_score = score;
      best = gi;
    }
  }
  return grid[best];
}

Array2 nn_vote_logits(const Array2& test, const SupportSet& spt, const NnConfig& cfg) {
  if (spt.rows() == 0) throw std::invalid_argument("nn_vote_logits: empty support set");
  if (cfg.k == 0) throw std::invalid_argument("nn_vote_logits: k must be >= 1");
  if (!(cfg.softmax_temp > 0.0) || !(cfg.rank_offset > 0.0)) {
    throw std::invalid_argument("nn_vote_logits: softmax_temp and rank_offset must be positive");
  }
  const Array2 sims = matmul_nt(test, spt.embeddings);
  const std::size_t k = std::min(cfg.k, spt.rows());
  Array2 logits(test.rows(), spt.num_classes);
  std::vector<std::size_t> order(spt.rows());
  std::vector<double> weights(k);
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto s = sims.row(i);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&s](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
    switch (cfg.vote) {
      case Vote::plurality:
        std::ranges::fill(weights, 1.0);
        break;
      case Vote::softmax: {
        // The leading similarity is the maximum, subtracted for stability.
        const double top = s[order[0]];
        double total = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
          weights[r] = std::exp((s[order[r]] - top) / cfg.softmax_temp);
          total += weights[r];
        }
        for (double& w : weights) w /= total;
        break;
      }
      case Vote::rank:
        for (std::size_t r = 0; r < k; ++r) weights[r] = 1.0 / (cfg.rank_offset + static_cast<double>(r));
        break;
    }
    auto out = logits.row(i);
    for (std::size_t r = 0; r < k; ++r) out[static_cast<std::size_t>(spt.label(order[r]))] += weights[r];
  }
  return logits;
}

Array2 snn_plus_zeroshot_logits(const Array2& test, const SupportSet& spt, const Array2& class_texts,
                                NnConfig cfg, double mix_weight) {
  Array2 logits = zero_shot_logits(test, class_texts);
  if (mix_weight == 0.0) return logits;
  cfg.vote = Vote::softmax;
  const Array2 nn = nn_vote_logits(test, spt, cfg);
  require_shape(nn.same_shape(logits), "snn_plus_zeroshot_logits", nn, logits);
  for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] += mix_weight * nn.data()[i];
  return logits;
}

std::vector<int> predict(const Array2& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.size(); ++c) {
      if (r[c] > r[best]) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Array2& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows()) {
    throw std::invalid_argument("accuracy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(logits.rows()) + " rows");
  }
  if (labels.empty()) return 0.0;
  const auto pred = predict(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace lixp
