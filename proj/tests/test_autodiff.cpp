// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "doctest.h"
#include "lixp/autodiff.hpp"
#include "lixp/gradcheck.hpp"
#include "test_util.hpp"

using namespace lixp;
using lixp::testing::probe;
using lixp::testing::random_array;

TEST_CASE("matmul values") {
  ad::Graph g;
  const Array2 m = Array2::from_rows({{1.5, -2.0}, {0.25, 4.0}});
  CHECK(ad::matmul(g.constant(Array2::identity(2)), g.constant(m)).value() == m);
  const auto v = ad::matmul(g.constant(Array2::from_rows({{1, 2}})), g.constant(Array2::from_rows({{3}, {4}})));
  CHECK(v.value() == Array2::from_rows({{11}}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  ad::Graph g;
  try {
    (void)ad::matmul(g.constant(Array2(2, 3)), g.constant(Array2(2, 3)));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3 vs 2x3") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  const Array2 a = random_array(3, 4, 1);
  const Array2 b = random_array(4, 2, 2);
  const auto r = gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return ad::sum(ad::matmul(p[0], p[1])); },
                           std::vector<Array2>{a, b});
  CHECK(r.max_rel_error < 1e-6);
  const auto weighted = gradcheck(
      [](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::matmul(p[0], p[1])); },
      std::vector<Array2>{a, b});
  CHECK(weighted.max_rel_error < 1e-6);
}

TEST_CASE("row_normalize") {
  ad::Graph g;
  SUBCASE("3-4-5 row") {
    const auto y = ad::row_normalize(g.constant(Array2::from_rows({{3, 4}})), 1e-12);
    CHECK(y.value()(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(y.value()(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("zero row stays zero") {
    const auto y = ad::row_normalize(g.constant(Array2(1, 3)), 1e-12);
    CHECK(y.value() == Array2(1, 3));
  }
  SUBCASE("unit norm rows") {
    const auto y = ad::row_normalize(g.constant(random_array(16, 7, 5)));
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(norm(y.value().row(i)) - 1.0) < 1e-12);
  }
  SUBCASE("gradcheck") {
    const auto r = gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::row_normalize(p[0])); },
                             std::vector<Array2>{random_array(4, 3, 11)});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("masked_softmax") {
  ad::Graph g;
  SUBCASE("single unmasked entry takes all weight") {
    const auto y = ad::masked_softmax(g.constant(Array2::from_rows({{5, 9}})), Array2::from_rows({{0, 1}}));
    CHECK(y.value() == Array2::from_rows({{0, 1}}));
  }
  SUBCASE("uniform on equal scores") {
    const auto y = ad::masked_softmax(g.constant(Array2(1, 3)), Array2(1, 3, 1.0));
    for (double v : y.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("all-masked row is an error") {
    CHECK_THROWS_AS(ad::masked_softmax(g.constant(Array2(2, 2)), Array2::from_rows({{1, 0}, {0, 0}})),
                    std::invalid_argument);
  }
  SUBCASE("rows sum to one, masked entries exactly zero with zero gradient") {
    Array2 mask(5, 5, 1.0);
    for (std::size_t i = 0; i < 5; ++i) mask(i, (i + 2) % 5) = 0.0;
    const auto s = g.parameter(random_array(5, 5, 3, -4, 4));
    const auto y = ad::masked_softmax(s, mask);
    for (std::size_t i = 0; i < 5; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        total += y.value()(i, j);
        if (mask(i, j) == 0.0) CHECK(y.value()(i, j) == 0.0);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    g.backward(probe(y));
    for (std::size_t i = 0; i < 5; ++i) CHECK(s.grad()(i, (i + 2) % 5) == 0.0);
  }
  SUBCASE("gradcheck with masked diagonal") {
    Array2 mask(4, 4, 1.0);
    for (std::size_t i = 0; i < 4; ++i) mask(i, i) = 0.0;
    const auto r = gradcheck(
        [&mask](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::masked_softmax(p[0], mask)); },
        std::vector<Array2>{random_array(4, 4, 21, -2, 2)});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("elementwise values") {
  ad::Graph g;
  const auto v = ad::log1p_exp(g.constant(Array2::from_rows({{0.0, -50.0, 50.0, -800.0, 800.0}}))).value();
  CHECK(v(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(v(0, 1) == doctest::Approx(1.9287498479639178e-22).epsilon(1e-12));
  CHECK(v(0, 2) == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(std::isfinite(v(0, 3)));
  CHECK(v(0, 4) == 800.0);
  CHECK_THROWS_AS(ad::log(g.constant(Array2::from_rows({{1.0, 0.0}}))), std::domain_error);
  CHECK_THROWS_AS(ad::log(g.constant(Array2::from_rows({{-1.0}}))), std::domain_error);
}

TEST_CASE("elementwise gradchecks") {
  const Array2 x = random_array(3, 4, 7, -2, 2);
  const Array2 y = random_array(3, 4, 8, -2, 2);
  const Array2 pos = random_array(3, 4, 9, 0.5, 3);
  using Unary = ad::Var (*)(ad::Var);
  const std::pair<const char*, Unary> unaries[] = {
      {"exp", ad::exp}, {"log1p_exp", ad::log1p_exp}, {"negate", ad::negate}, {"tanh", ad::tanh}};
  for (const auto& [name, fn] : unaries) {
    CAPTURE(name);
    const auto r = gradcheck([fn](ad::Graph&, std::span<const ad::Var> p) { return probe(fn(p[0])); },
                             std::vector<Array2>{x});
    CHECK(r.max_rel_error < 1e-6);
  }
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::log(p[0])); },
                  std::vector<Array2>{pos})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::add(p[0], p[1])); },
                  std::vector<Array2>{x, y})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::sub(p[0], p[1])); },
                  std::vector<Array2>{x, y})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::mul(p[0], p[1])); },
                  std::vector<Array2>{x, y})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::scale(p[0], -2.5)); },
                  std::vector<Array2>{x})
            .max_rel_error < 1e-6);
  CHECK(gradcheck(
            [](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::mul_scalar(p[0], ad::exp(p[1]))); },
            std::vector<Array2>{x, Array2::scalar(0.3)})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::add_scalar(p[0], p[1])); },
                  std::vector<Array2>{x, Array2::scalar(-1.2)})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::add_row(p[0], p[1])); },
                  std::vector<Array2>{x, random_array(1, 4, 10)})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::row_logsumexp(p[0])); },
                  std::vector<Array2>{x})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::layer_norm_rows(p[0])); },
                  std::vector<Array2>{x})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::transpose(p[0])); },
                  std::vector<Array2>{x})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::diagonal(p[0])); },
                  std::vector<Array2>{random_array(4, 4, 12)})
            .max_rel_error < 1e-6);
  CHECK(gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::concat_rows(p[0], p[1])); },
                  std::vector<Array2>{x, y})
            .max_rel_error < 1e-6);
  const std::vector<std::size_t> idx{2, 0, 2};
  CHECK(gradcheck([&idx](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::select_rows(p[0], idx)); },
                  std::vector<Array2>{x})
            .max_rel_error < 1e-6);
}

TEST_CASE("relu gradient away from the kink") {
  Array2 x = random_array(3, 4, 13, -2, 2);
  for (double& v : x.data()) v += v > 0 ? 0.1 : -0.1;
  const auto r = gradcheck([](ad::Graph&, std::span<const ad::Var> p) { return probe(ad::relu(p[0])); },
                           std::vector<Array2>{x});
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("backward contract") {
  SUBCASE("sum of a parameter has all-ones gradient") {
    ad::Graph g;
    const auto p = g.parameter(random_array(2, 3, 1));
    CHECK(p.grad() == Array2(2, 3));
    g.backward(ad::sum(p));
    CHECK(p.grad() == Array2(2, 3, 1.0));
  }
  SUBCASE("second call without zero_grad throws") {
    ad::Graph g;
    const auto p = g.parameter(random_array(2, 3, 1));
    const auto loss = ad::sum(p);
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), std::logic_error);
    g.zero_grad();
    CHECK(p.grad() == Array2(2, 3));
    g.backward(loss);
    CHECK(p.grad() == Array2(2, 3, 1.0));
  }
  SUBCASE("non-scalar loss is rejected") {
    ad::Graph g;
    const auto p = g.parameter(random_array(2, 3, 1));
    CHECK_THROWS_AS(g.backward(p), DimensionError);
  }
  SUBCASE("constants and detached nodes get no gradient") {
    ad::Graph g;
    const auto p = g.parameter(random_array(2, 2, 1));
    const auto c = g.constant(random_array(2, 2, 2));
    g.backward(ad::sum(ad::add(ad::mul(p, c), ad::detach(p))));
    CHECK(p.grad() == c.value());
    CHECK(c.grad() == Array2(2, 2));
  }
}

TEST_CASE("finite_difference_grad oracle") {
  const auto square = [](std::span<const Array2> p) { return p[0].item() * p[0].item(); };
  const auto grads = finite_difference_grad(square, std::vector<Array2>{Array2::scalar(3.0)}, 1e-5);
  CHECK(std::abs(grads[0].item() - 6.0) < 1e-8);
  const auto flat = finite_difference_grad([](std::span<const Array2>) { return 4.2; },
                                           std::vector<Array2>{random_array(2, 2, 3)});
  CHECK(flat[0] == Array2(2, 2));
  CHECK_THROWS_AS(finite_difference_grad(square, std::vector<Array2>{Array2::scalar(1.0)}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("evaluation and backward are bitwise deterministic") {
  const Array2 a = random_array(6, 5, 31);
  const Array2 b = random_array(5, 6, 32);
  auto run = [&] {
    ad::Graph g;
    const auto pa = g.parameter(a);
    const auto pb = g.parameter(b);
    const auto loss = probe(ad::row_normalize(ad::matmul(ad::tanh(pa), pb)));
    g.backward(loss);
    return std::make_tuple(loss.value(), pa.grad(), pb.grad());
  };
  CHECK(run() == run());
}

TEST_CASE("gradients agree with finite differences over many seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    Array2 mask(5, 5, 1.0);
    for (std::size_t i = 0; i < 5; ++i) mask(i, i) = 0.0;
    const auto r = gradcheck(
        [&mask](ad::Graph&, std::span<const ad::Var> p) {
          const auto scores = ad::matmul(ad::row_normalize(p[0]), ad::transpose(ad::row_normalize(p[0])));
          const auto w = ad::masked_softmax(ad::scale(scores, 3.0), mask);
          return probe(ad::log1p_exp(ad::matmul(w, p[1])));
        },
        std::vector<Array2>{random_array(5, 4, 100 + seed), random_array(5, 4, 200 + seed)});
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("value references survive later recording") {
  ad::Graph g;
  const ad::Var a = g.parameter(Array2::from_rows({{1.0, 2.0}}));
  const Array2& ref = a.value();
  for (int i = 0; i < 5000; ++i) (void)g.constant(Array2(1, 1));
  CHECK(ref(0, 1) == 2.0);
  CHECK(&ref == &a.value());
}
