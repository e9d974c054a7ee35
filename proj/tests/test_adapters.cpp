// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lixp/adapters.hpp"
#include "lixp/rng.hpp"
#include "adapter_oracles.hpp"
#include "test_util.hpp"

using namespace lixp;

using namespace lixp::oracle;

TEST_CASE("zero_shot: one-hot and bounds") {
  const Array2 texts = Array2::identity(5);
  Array2 test(1, 5);
  test(0, 3) = 1.0;
  CHECK(zero_shot_logits(test, texts) == Array2::from_rows({{0.0, 0.0, 0.0, 1.0, 0.0}}));
  const Array2 l = zero_shot_logits(testing::random_unit_rows(5, 8, 1), testing::random_unit_rows(4, 8, 2));
  for (double v : l.data()) CHECK(std::abs(v) <= 1.0 + 1e-15);
  CHECK_THROWS_AS(zero_shot_logits(Array2(2, 3), Array2(2, 4)), DimensionError);
}

TEST_CASE("prototypes: degenerate cases") {
  const Array2 x = testing::random_unit_rows(3, 4, 5);
  const SupportSet s1 = SupportSet::from_labels(x, {0, 1, 2}, 3);
  CHECK(build_prototypes(s1).prototypes == x);
  CHECK(s1.shots == 1);

  Array2 anti(2, 2);
  anti(0, 0) = 1.0;
  anti(1, 0) = -1.0;
  const SupportSet s2 = SupportSet::from_labels(anti, {0, 0}, 1);
  const PrototypeSet p = build_prototypes(s2);
  CHECK(p.prototypes == Array2(1, 2));
  CHECK(prototypical_logits(testing::random_unit_rows(3, 2, 1), p) == Array2(3, 1));
}

TEST_CASE("SupportSet invariants") {
  const Array2 x = testing::random_unit_rows(3, 4, 5);
  CHECK_THROWS(SupportSet::from_labels(x, {0, 0, 0}, 2));
  CHECK_THROWS(SupportSet::from_labels(x, {0, 1, 5}, 2));
  CHECK_THROWS(SupportSet::from_labels(x, {0, 1}, 2));
  Array2 y = x;
  y(0, 0) += 0.1;
  CHECK_THROWS(SupportSet::from_labels(y, {0, 1, 1}, 2));
}

TEST_CASE("tip: mix 0 is zero-shot bitwise, defaults, hand-built instance") {
  const TipConfig defaults;
  CHECK(defaults.mix == 1.0);
  CHECK(defaults.sharpness == 5.5);
  const NnConfig nn;
  CHECK(nn.k == 32);
  CHECK(nn.softmax_temp == 0.07);
  CHECK(nn.rank_offset == 2.0);

  const Instance in = random_instance(3);
  const SupportSet s = SupportSet::from_labels(in.support, in.labels, in.n);
  CHECK(tip_adapter_logits(in.test, s, in.texts, TipConfig{0.0, 5.5}) == zero_shot_logits(in.test, in.texts));

  // 3 classes, K = 2; the test row equals the first class-1 support.
  const Array2 spt = testing::random_unit_rows(6, 4, 77);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  const SupportSet hs = SupportSet::from_labels(spt, labels, 3);
  const Array2 texts = testing::random_unit_rows(3, 4, 78);
  const Array2 test = select_rows(spt, std::vector<std::size_t>{1});
  const Array2 got = tip_adapter_logits(test, hs, texts);
  Instance h;
  h.n = 3;
  h.d = 4;
  h.support = spt;
  h.labels = labels;
  h.test = test;
  h.texts = texts;
  CHECK(max_abs_diff(got, ref_tip(h, 1.0, 5.5)) <= 1e-12);
  const double others = std::exp(-5.5 * (1.0 - dot(test.row(0), spt.row(4))));
  CHECK(got(0, 1) == doctest::Approx(dot(test.row(0), texts.row(1)) + 1.0 + others).epsilon(1e-13));
  CHECK_THROWS(tip_adapter_logits(test, hs, texts, TipConfig{1.0, 0.0}));
}

TEST_CASE("classifiers agree with brute-force oracles on 50 instances") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance in = random_instance(seed);
    const SupportSet s = SupportSet::from_labels(in.support, in.labels, in.n);
    const auto track = [&worst](const Array2& a, const Array2& b) {
      REQUIRE(a.same_shape(b));
      worst = std::max(worst, max_abs_diff(a, b));
    };
    track(zero_shot_logits(in.test, in.texts), ref_zero_shot(in.test, in.texts));
    track(build_prototypes(s).prototypes, ref_prototypes(in));
    track(prototypical_logits(in.test, build_prototypes(s)), ref_zero_shot(in.test, ref_prototypes(in)));
    track(tip_adapter_logits(in.test, s, in.texts), ref_tip(in, 1.0, 5.5));
    track(tip_adapter_logits(in.test, s, in.texts, {2.0, 11.0}), ref_tip(in, 2.0, 11.0));
    for (Vote v : {Vote::plurality, Vote::softmax, Vote::rank}) {
      for (std::size_t k : {1u, 3u, 32u}) {
        NnConfig cfg;
        cfg.k = k;
        cfg.vote = v;
        track(nn_vote_logits(in.test, s, cfg), ref_nn(in, k, v));
      }
    }
    Array2 combo = ref_zero_shot(in.test, in.texts);
    const Array2 nn = ref_nn(in, 32, Vote::softmax);
    for (std::size_t i = 0; i < combo.size(); ++i) combo.data()[i] += nn.data()[i];
    track(snn_plus_zeroshot_logits(in.test, s, in.texts), combo);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("nn vote: capping, weights, 1-NN reduction") {
  const Instance in = random_instance(11);
  Instance two = in;
  two.n = 2;
  two.k = 4;
  two.support = testing::random_unit_rows(8, in.d, 4);
  two.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  const SupportSet s = SupportSet::from_labels(two.support, two.labels, 2);
  NnConfig plural;
  plural.vote = Vote::plurality;
  const Array2 l = nn_vote_logits(in.test, s, plural);
  for (std::size_t i = 0; i < l.rows(); ++i) CHECK(l(i, 0) + l(i, 1) == 8.0);

  const Array2 soft = nn_vote_logits(in.test, s);
  for (std::size_t i = 0; i < soft.rows(); ++i) CHECK(std::abs(soft(i, 0) + soft(i, 1) - 1.0) <= 1e-12);

  NnConfig one;
  one.k = 1;
  for (Vote v : {Vote::plurality, Vote::softmax, Vote::rank}) {
    one.vote = v;
    const auto pred = predict(nn_vote_logits(in.test, s, one));
    const Array2 sims = matmul_nt(in.test, two.support);
    for (std::size_t i = 0; i < in.test.rows(); ++i) {
      const auto r = sims.row(i);
      const auto best = static_cast<std::size_t>(std::ranges::max_element(r) - r.begin());
      CHECK(pred[i] == two.labels[best]);
    }
  }
  CHECK_THROWS(nn_vote_logits(in.test, s, NnConfig{0, 0.07, 2.0, Vote::softmax}));
  CHECK(parse_vote(to_string(Vote::rank)) == Vote::rank);
}

TEST_CASE("nn vote: ties broken by support row index") {
  Array2 spt(4, 2);
  spt(0, 0) = 1.0;  // class 1
  spt(1, 0) = 1.0;  // class 0, identical to row 0
  spt(2, 1) = 1.0;
  spt(3, 1) = 1.0;
  const SupportSet s = SupportSet::from_labels(spt, {1, 0, 0, 1}, 2);
  Array2 test(1, 2);
  test(0, 0) = 1.0;
  NnConfig cfg;
  cfg.k = 1;
  cfg.vote = Vote::plurality;
  CHECK(nn_vote_logits(test, s, cfg) == Array2::from_rows({{0.0, 1.0}}));
  cfg.k = 2;
  // Plurality tie between classes goes to the smallest index.
  CHECK(predict(nn_vote_logits(test, s, cfg)) == std::vector<int>{0});
}

TEST_CASE("snn combination: mix 0 and orthogonal tests") {
  const Instance in = random_instance(21);
  const SupportSet s = SupportSet::from_labels(in.support, in.labels, in.n);
  CHECK(snn_plus_zeroshot_logits(in.test, s, in.texts, {}, 0.0) == zero_shot_logits(in.test, in.texts));
  // Test rows orthogonal to every text: logits are the NN term scaled.
  Array2 texts(in.n, in.d + 1);
  for (std::size_t c = 0; c < in.n; ++c) texts(c, in.d) = 1.0;
  Array2 spt(in.support.rows(), in.d + 1), test(in.test.rows(), in.d + 1);
  for (std::size_t i = 0; i < spt.rows(); ++i) {
    for (std::size_t j = 0; j < in.d; ++j) spt(i, j) = in.support(i, j);
  }
  for (std::size_t i = 0; i < test.rows(); ++i) {
    for (std::size_t j = 0; j < in.d; ++j) test(i, j) = in.test(i, j);
  }
  const SupportSet s2 = SupportSet::from_labels(spt, in.labels, in.n);
  const Array2 got = snn_plus_zeroshot_logits(test, s2, texts, {}, 2.5);
  const Array2 nn = nn_vote_logits(test, s2);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == 2.5 * nn.data()[i]);
}

TEST_CASE("argmax invariance under constant offsets") {
  const Instance in = random_instance(5);
  const SupportSet s = SupportSet::from_labels(in.support, in.labels, in.n);
  for (const Array2& l : {zero_shot_logits(in.test, in.texts), prototypical_logits(in.test, build_prototypes(s))}) {
    Array2 shifted = l;
    for (std::size_t i = 0; i < l.rows(); ++i) {
      for (double& v : shifted.row(i)) v += 3.0 * static_cast<double>(i) - 1.0;
    }
    CHECK(predict(shifted) == predict(l));
  }
  CHECK(predict(Array2::from_rows({{1.0, 1.0, 0.5}})) == std::vector<int>{0});
  CHECK(accuracy(Array2::from_rows({{1.0, 0.0}, {1.0, 2.0}}), {0, 0}) == 0.5);
}

TEST_CASE("rank weights strictly decrease, softmax weights non-increasing") {
  Array2 spt(5, 5);
  for (std::size_t i = 0; i < 5; ++i) spt(i, i) = 1.0;
  const SupportSet s = SupportSet::from_labels(spt, {0, 1, 2, 3, 4}, 5);
  const Array2 test = row_normalized(Array2::from_rows({{5.0, 4.0, 3.0, 2.0, 1.0}}), 1e-12);
  NnConfig cfg;
  cfg.vote = Vote::rank;
  const Array2 r = nn_vote_logits(test, s, cfg);
  cfg.vote = Vote::softmax;
  const Array2 m = nn_vote_logits(test, s, cfg);
  for (std::size_t c = 0; c + 1 < 5; ++c) {
    CHECK(r(0, c) > r(0, c + 1));
    CHECK(m(0, c) >= m(0, c + 1));
  }
  CHECK(r(0, 0) == 0.5);
}

TEST_CASE("cv_tip_select") {
  const Instance in = random_instance(9);
  const SupportSet s = SupportSet::from_labels(in.support, in.labels, in.n);
  CHECK(cv_tip_select(s, in.texts, {TipConfig{3.0, 2.0}}) == TipConfig{3.0, 2.0});
  CHECK_THROWS(cv_tip_select(s, in.texts, {}));
  CHECK(default_tip_grid().size() == 16);
  CHECK(default_tip_grid()[1] == TipConfig{0.5, 2.75});

  // Texts point at the wrong class, so only a strong cache term is accurate.
  const std::size_t n = 3, k = 6, d = 6;
  Array2 spt(n * k, d);
  std::vector<int> labels;
  Rng rng(4);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t row = c * k + r;
      spt(row, c) = 1.0;
      for (std::size_t j = 0; j < d; ++j) spt(row, j) += 0.05 * rng.normal();
      labels.push_back(static_cast<int>(c));
    }
  }
  const SupportSet sep = SupportSet::from_labels(row_normalized(spt, 1e-12), labels, n);
  Array2 texts(n, d);
  for (std::size_t c = 0; c < n; ++c) texts(c, (c + 1) % n) = 1.0;
  const std::vector<TipConfig> grid{{0.01, 1.0}, {4.0, 11.0}};
  CHECK(cv_tip_select(sep, texts, grid, 3, 1) == TipConfig{4.0, 11.0});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CHECK(cv_tip_select(s, in.texts, default_tip_grid(), 3, seed) ==
          cv_tip_select(s, in.texts, default_tip_grid(), 3, seed));
  }
  // One row per class leaves nothing to hold out.
  const SupportSet single = SupportSet::from_labels(testing::random_unit_rows(2, 3, 1), {0, 1}, 2);
  CHECK(cv_tip_select(single, testing::random_unit_rows(2, 3, 2), grid) == grid.front());
}
