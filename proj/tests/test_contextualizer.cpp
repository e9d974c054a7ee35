// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "lixp/contextualizer.hpp"
#include "lixp/gradcheck.hpp"
#include "test_util.hpp"

using namespace lixp;

namespace {

TemperatureSet fixed_temps(ad::Graph& g, double tau_ctx, double tau1 = 10.0, double tau2 = 10.0) {
  return TemperatureSet{g.parameter(Array2::scalar(std::log(tau1))), g.parameter(Array2::scalar(std::log(tau2))),
                        g.parameter(Array2::scalar(std::log(tau_ctx))), g.parameter(Array2::scalar(-10.0))};
}

Array2 self_mask(std::size_t n) {
  Array2 m(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 0.0;
  return m;
}

// Squared distance of every row of `y` from the row space of `v`, via the
// normal equations (V V^T) c = V y solved by Gaussian elimination.
double max_row_space_residual(const Array2& v, const Array2& y) {
  const std::size_t r = v.rows();
  double worst = 0.0;
  for (std::size_t q = 0; q < y.rows(); ++q) {
    Array2 a = matmul_nt(v, v);
    std::vector<double> b(r);
    for (std::size_t i = 0; i < r; ++i) b[i] = dot(v.row(i), y.row(q));
    for (std::size_t c = 0; c < r; ++c) {
      std::size_t piv = c;
      for (std::size_t i = c + 1; i < r; ++i) {
        if (std::abs(a(i, c)) > std::abs(a(piv, c))) piv = i;
      }
      for (std::size_t j = 0; j < r; ++j) std::swap(a(c, j), a(piv, j));
      std::swap(b[c], b[piv]);
      for (std::size_t i = c + 1; i < r; ++i) {
        const double f = a(i, c) / a(c, c);
        for (std::size_t j = c; j < r; ++j) a(i, j) -= f * a(c, j);
        b[i] -= f * b[c];
      }
    }
    std::vector<double> coef(r);
    for (std::size_t i = r; i-- > 0;) {
      double s = b[i];
      for (std::size_t j = i + 1; j < r; ++j) s -= a(i, j) * coef[j];
      coef[i] = s / a(i, i);
    }
    double res = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      double fit = 0.0;
      for (std::size_t i = 0; i < r; ++i) fit += coef[i] * v(i, j);
      res += (y(q, j) - fit) * (y(q, j) - fit);
    }
    worst = std::max(worst, std::sqrt(res));
  }
  return worst;
}

}  // namespace

TEST_CASE("contextualize: batch of two with self mask copies the other value") {
  for (double tau : {1e-3, 1.0, 1e3}) {
    ad::Graph g;
    const TemperatureSet temps = fixed_temps(g, tau);
    const Array2 raw = testing::random_array(2, 5, 3);
    const EmbeddingBatch x = make_embedding(g.constant(raw));
    const ContextBuffer buf{x.normalized, x.raw, self_mask(2)};
    const Array2 out = contextualize(x, buf, temps).raw.value();
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(out(0, j) == raw(1, j));
      CHECK(out(1, j) == raw(0, j));
    }
  }
}

TEST_CASE("contextualize: huge tau_ctx gives uniform weights") {
  ad::Graph g;
  const TemperatureSet temps = fixed_temps(g, 1e6);
  const EmbeddingBatch x = make_embedding(g.constant(testing::random_array(6, 4, 1)));
  const ContextBuffer buf{x.normalized, x.raw, self_mask(6)};
  const Array2 w = contextualize_with_weights(x, buf, temps).weights.value();
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(w(i, j) - (i == j ? 0.0 : 0.2)) < 1e-6);
  }
}

TEST_CASE("contextualize: mask law on random batches") {
  for (std::size_t n : {2u, 3u, 7u, 16u, 64u}) {
    ad::Graph g;
    const EmbeddingBatch x = make_embedding(g.constant(testing::random_array(n, 8, n)));
    {
      const TemperatureSet temps = fixed_temps(g, 1.0);
      const Array2 w = contextualize_with_weights(x, ContextBuffer{x.normalized, x.raw, self_mask(n)}, temps)
                           .weights.value();
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(w(i, i) == 0.0);
        double s = 0.0;
        for (double v : w.row(i)) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
    }
    {
      const TemperatureSet temps = fixed_temps(g, 1e-3);
      const Array2 w =
          contextualize_with_weights(x, ContextBuffer{x.normalized, x.raw, Array2(n, n, 1.0)}, temps).weights.value();
      for (std::size_t i = 0; i < n; ++i) CHECK(w(i, i) > 0.99);
    }
  }
}

TEST_CASE("contextualize: errors") {
  ad::Graph g;
  const TemperatureSet temps = fixed_temps(g, 1.0);
  const EmbeddingBatch x = make_embedding(g.constant(testing::random_array(1, 3, 1)));
  CHECK_THROWS(contextualize(x, ContextBuffer{x.normalized, x.raw, Array2(1, 1)}, temps));
  CHECK_THROWS_AS(contextualize(x, ContextBuffer{x.normalized, x.raw, Array2(2, 1, 1.0)}, temps), DimensionError);
  LixpConfig cfg;
  CHECK_THROWS(build_in_batch_buffer(x, x, cfg));
  cfg.active_buffer_subset = 0;
  const EmbeddingBatch y = make_embedding(g.constant(testing::random_array(4, 3, 1)));
  CHECK_THROWS(build_in_batch_buffer(y, y, cfg));
  CHECK_THROWS(cfg.validate(4));
}

TEST_CASE("contextualize: gradcheck under all stop-gradient settings") {
  for (bool gk : {true, false}) {
    for (bool gv : {true, false}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const std::vector<Array2> params{testing::random_array(6, 8, seed), testing::random_unit_rows(6, 8, seed + 10),
                                         testing::random_array(6, 8, seed + 20), Array2::scalar(-0.7)};
        const auto build = [gk, gv](ad::Graph& g, std::span<const ad::Var> v) {
          const TemperatureSet temps{g.constant(Array2::scalar(0.0)), g.constant(Array2::scalar(0.0)), v[3],
                                     g.constant(Array2::scalar(0.0))};
          const ContextBuffer buf{v[1], v[2], self_mask(6), gk, gv};
          return testing::probe(contextualize(make_embedding(v[0]), buf, temps).normalized);
        };
        const GradcheckResult r = gradcheck(build, params);
        INFO("keys=", gk, " values=", gv, " seed=", seed);
        // Frozen components: backward gives exactly zero while FD is nonzero.
        double fd_k = 0.0, fd_v = 0.0;
        for (double d : r.numeric[1].data()) fd_k = std::max(fd_k, std::abs(d));
        for (double d : r.numeric[2].data()) fd_v = std::max(fd_v, std::abs(d));
        CHECK(fd_k > 1e-6);
        CHECK(fd_v > 1e-6);
        if (!gk) {
          for (double d : r.analytic[1].data()) CHECK(d == 0.0);
        }
        if (!gv) {
          for (double d : r.analytic[2].data()) CHECK(d == 0.0);
        }
        // Active components must match finite differences.
        for (std::size_t p = 0; p < 4; ++p) {
          if ((p == 1 && !gk) || (p == 2 && !gv)) continue;
          for (std::size_t j = 0; j < params[p].size(); ++j) {
            const double a = r.analytic[p].data()[j];
            const double n = r.numeric[p].data()[j];
            CHECK(std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradcheckFloor}) < 1e-4);
          }
        }
      }
    }
  }
}

TEST_CASE("contextualize: equivariance and row space of values") {
  ad::Graph g;
  const TemperatureSet temps = fixed_temps(g, 0.3);
  const Array2 raw = testing::random_array(6, 8, 5);
  const std::vector<std::size_t> perm{2, 5, 1, 0, 4, 3};
  const EmbeddingBatch x = make_embedding(g.constant(raw));
  const EmbeddingBatch xp = make_embedding(g.constant(select_rows(raw, perm)));
  const Array2 out = contextualize(x, ContextBuffer{x.normalized, x.raw, self_mask(6)}, temps).raw.value();
  const Array2 outp = contextualize(xp, ContextBuffer{xp.normalized, xp.raw, self_mask(6)}, temps).raw.value();
  CHECK(max_abs_diff(select_rows(out, perm), outp) < 1e-14);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Array2 v = testing::random_array(5, 8, 100 + s);
    const EmbeddingBatch q = make_embedding(g.constant(testing::random_array(4, 8, 200 + s)));
    const EmbeddingBatch kv = make_embedding(g.constant(v));
    const Array2 y = contextualize(q, ContextBuffer{kv.normalized, kv.raw, Array2(4, 5, 1.0)}, temps).raw.value();
    CHECK(max_row_space_residual(v, y) < 1e-8);
  }
}

TEST_CASE("build_in_batch_buffer: default and subset") {
  ad::Graph g;
  LixpConfig cfg;
  const EmbeddingBatch x = make_embedding(g.parameter(testing::random_array(4, 3, 1)));
  {
    const ContextBuffer b = build_in_batch_buffer(x, x, cfg);
    CHECK(b.mask == self_mask(4));
    CHECK(b.keys.value() == x.normalized.value());
    CHECK(b.values.value() == x.raw.value());
  }
  {
    cfg.active_buffer_subset = 2;
    BufferInputs in;
    in.subset_seed = 42;
    const ContextBuffer b = build_in_batch_buffer(x, x, cfg, in);
    CHECK(b.rows() == 2);
    CHECK(b.mask.rows() == 4);
    CHECK(b.mask.cols() == 2);
    std::size_t zeros = 0;
    for (std::size_t j = 0; j < 2; ++j) {
      // Find which batch row this buffer column came from; its mask entry is 0.
      for (std::size_t i = 0; i < 4; ++i) {
        const bool same = b.values.value().row(j)[0] == x.raw.value().row(i)[0];
        if (same) CHECK(b.mask(i, j) == 0.0);
        if (!same) CHECK(b.mask(i, j) == 1.0);
      }
    }
    for (double m : b.mask.data()) zeros += m == 0.0 ? 1 : 0;
    CHECK(zeros == 2);
    CHECK(build_in_batch_buffer(x, x, cfg, in).mask == b.mask);
    cfg.active_buffer_subset.reset();
  }
}

TEST_CASE("build_in_batch_buffer: stale rows carry no gradient") {
  LixpConfig cfg;
  cfg.stale_buffer_size = 8;
  StaleBuffer stale(8);
  BufferInputs in;
  in.stale = &stale;
  for (std::uint64_t step = 0; step < 3; ++step) {
    ad::Graph g;
    const TemperatureSet temps = fixed_temps(g, 1.0);
    const ad::Var raw = g.parameter(testing::random_array(4, 3, 10 + step));
    const EmbeddingBatch xs = make_embedding(raw);
    const ContextBuffer b = build_in_batch_buffer(xs, xs, cfg, in);
    CHECK(b.rows() == 4 + std::min<std::size_t>(4 * step, 8));
    const ad::Var loss = testing::probe(contextualize(xs, b, temps).normalized);
    g.backward(loss);
    // Only the fresh batch is a parameter; every gradient-carrying path starts there.
    std::size_t params = 0;
    for (std::size_t id : g.parameters()) params += id == raw.id ? 1 : 0;
    CHECK(params == 1);
    if (step == 2) {
      // Stale rows enter as constants.
      const std::size_t stale_node = g.parents(b.keys.id).back();
      CHECK_FALSE(g.requires_grad(stale_node));
    }
  }
}

TEST_CASE("build_in_batch_buffer: variants") {
  ad::Graph g;
  const EmbeddingBatch x = make_embedding(g.parameter(testing::random_array(5, 4, 1)));
  const EmbeddingBatch t = make_embedding(g.parameter(testing::random_array(5, 4, 2)));
  LixpConfig cfg;
  cfg.variant = ContextVariant::multimodal_values;
  CHECK(build_in_batch_buffer(x, t, cfg).values.value() == t.raw.value());
  cfg.variant = ContextVariant::single_stage;
  cfg.self_mask = false;
  CHECK(build_in_batch_buffer(x, t, cfg).mask == Array2(5, 5, 1.0));
  cfg.qk_normalized = false;
  CHECK(build_in_batch_buffer(x, t, cfg).keys.value() == x.raw.value());
  cfg.qk_normalized = true;
  cfg.layernorm_keys = true;
  cfg.layernorm_values = true;
  const ContextBuffer ln = build_in_batch_buffer(x, t, cfg);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(norm(ln.keys.value().row(i)) == doctest::Approx(1.0).epsilon(1e-12));
    double m = 0.0;
    for (double v : ln.values.value().row(i)) m += v;
    CHECK(std::abs(m) < 1e-12);
  }
  cfg = LixpConfig{};
  cfg.separate_context_batch = true;
  const EmbeddingBatch c = make_embedding(g.parameter(testing::random_array(3, 4, 3)));
  CHECK_THROWS(build_in_batch_buffer(x, t, cfg));
  BufferInputs in;
  in.context_images = &c;
  const ContextBuffer sep = build_in_batch_buffer(x, t, cfg, in);
  CHECK(sep.mask == Array2(5, 3, 1.0));
  CHECK(sep.values.value() == c.raw.value());
}

TEST_CASE("value heads: shapes and gradcheck") {
  for (ValueHead head : {ValueHead::linear, ValueHead::mlp2, ValueHead::mlp3}) {
    LixpConfig cfg;
    cfg.value_head = head;
    ParameterStore store;
    init_context_parameters(store, cfg, 4, 7);
    CHECK(store.size() == 2 * (head == ValueHead::linear ? 1 : head == ValueHead::mlp2 ? 2 : 3));
    std::vector<Array2> params{testing::random_array(5, 4, 1)};
    for (const auto& e : store.entries()) params.push_back(e.value);
    // Compute via BoundParameters and compare with finite differences.
    const auto loss_of = [&](std::span<const Array2> ps, std::vector<Array2>* grads) {
      ParameterStore local;
      for (std::size_t i = 1; i < ps.size(); ++i) local.add(store.entries()[i - 1].name, ps[i]);
      ad::Graph g;
      BoundParameters bp(g, local);
      const ad::Var raw = g.parameter(ps[0]);
      const EmbeddingBatch x = make_embedding(raw);
      const TemperatureSet temps = fixed_temps(g, 0.5);
      BufferInputs in;
      in.params = &bp;
      const ContextBuffer b = build_in_batch_buffer(x, x, cfg, in);
      const ad::Var loss = testing::probe(contextualize(x, b, temps).normalized);
      if (grads != nullptr) {
        g.backward(loss);
        grads->push_back(raw.grad());
        for (const Array2& gr : bp.gradients()) grads->push_back(gr);
      }
      return loss.value().item();
    };
    std::vector<Array2> analytic;
    loss_of(params, &analytic);
    const auto numeric = finite_difference_grad([&](std::span<const Array2> ps) { return loss_of(ps, nullptr); },
                                                params);
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t j = 0; j < params[p].size(); ++j) {
        const double a = analytic[p].data()[j];
        const double n = numeric[p].data()[j];
        worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradcheckFloor}));
      }
    }
    INFO(to_string(head));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("two_stage: M=1 identity is bitwise single stage") {
  ad::Graph g;
  const TemperatureSet temps = fixed_temps(g, 0.4);
  const EmbeddingBatch x = make_embedding(g.constant(testing::random_array(5, 6, 2)));
  const ContextBuffer buf{x.normalized, x.raw, self_mask(5)};
  const TwoStageConfig ts{1, InterStageMap::identity, false};
  const EmbeddingBatch two = two_stage_contextualize(x, buf, temps, ts);
  const EmbeddingBatch one = contextualize(x, buf, temps);
  CHECK(two.raw.value() == one.raw.value());
  CHECK(two.normalized.value() == one.normalized.value());
}

TEST_CASE("two_stage: hand trace of the 2x2 case") {
  ad::Graph g;
  const TemperatureSet temps = fixed_temps(g, 1.0);
  const Array2 raw = Array2::from_rows({{3.0, 0.0}, {0.0, 2.0}});
  const EmbeddingBatch x = make_embedding(g.constant(raw));
  const ContextBuffer buf{x.normalized, x.raw, self_mask(2)};
  // Fixed buffer: each stage copies the other row of the original values,
  // so after two stages row i still holds values row (1 - i).
  const Array2 fixed = two_stage_contextualize(x, buf, temps, {2, InterStageMap::identity, false}).raw.value();
  CHECK(fixed == Array2::from_rows({{0.0, 2.0}, {3.0, 0.0}}));
  // Rebuilt buffer: stage two swaps the swapped rows back.
  const Array2 rebuilt = two_stage_contextualize(x, buf, temps, {2, InterStageMap::identity, true}).raw.value();
  CHECK(rebuilt == raw);
}

TEST_CASE("two_stage: gradcheck with linear psi") {
  for (bool rebuild : {false, true}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      LixpConfig cfg;
      cfg.variant = ContextVariant::two_stage;
      cfg.two_stage.rebuild_buffer = rebuild;
      ParameterStore store;
      init_context_parameters(store, cfg, 4, seed);
      REQUIRE(store.size() == 2);
      CHECK(store.at("ctx.psi.w0") == Array2::identity(4));
      store.at("ctx.psi.w0") = testing::random_array(4, 4, seed + 5);
      store.at("ctx.psi.b0") = testing::random_array(1, 4, seed + 6);
      std::vector<Array2> params{testing::random_array(5, 4, seed), Array2::scalar(-0.3)};
      for (const auto& e : store.entries()) params.push_back(e.value);
      const auto loss_of = [&](std::span<const Array2> ps, std::vector<Array2>* grads) {
        ParameterStore local;
        for (std::size_t i = 2; i < ps.size(); ++i) local.add(store.entries()[i - 2].name, ps[i]);
        ad::Graph g;
        BoundParameters bp(g, local);
        const ad::Var raw = g.parameter(ps[0]);
        const ad::Var log_ctx = g.parameter(ps[1]);
        const TemperatureSet temps{g.constant(Array2::scalar(0.0)), g.constant(Array2::scalar(0.0)), log_ctx,
                                   g.constant(Array2::scalar(0.0))};
        const EmbeddingBatch x = make_embedding(raw);
        const ContextBuffer buf{x.normalized, x.raw, self_mask(5)};
        const ad::Var loss = testing::probe(two_stage_contextualize(x, buf, temps, cfg.two_stage, &bp).normalized);
        if (grads != nullptr) {
          g.backward(loss);
          grads->push_back(raw.grad());
          grads->push_back(log_ctx.grad());
          for (const Array2& gr : bp.gradients()) grads->push_back(gr);
        }
        return loss.value().item();
      };
      std::vector<Array2> analytic;
      loss_of(params, &analytic);
      const auto numeric =
          finite_difference_grad([&](std::span<const Array2> ps) { return loss_of(ps, nullptr); }, params);
      double worst = 0.0;
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t j = 0; j < params[p].size(); ++j) {
          const double a = analytic[p].data()[j];
          const double n = numeric[p].data()[j];
          worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradcheckFloor}));
        }
      }
      INFO("rebuild=", rebuild, " seed=", seed);
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("lixp_loss: alpha=1 is the base loss bitwise") {
  for (BaseLoss kind : {BaseLoss::clip, BaseLoss::siglip}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      ad::Graph g;
      const TemperatureSet temps = fixed_temps(g, 1.0, 10.0, 3.0);
      const EmbeddingBatch x = make_embedding(g.parameter(testing::random_array(6, 4, seed)));
      const EmbeddingBatch t = make_embedding(g.parameter(testing::random_array(6, 4, seed + 99)));
      LixpConfig cfg;
      cfg.alpha = 1.0;
      cfg.base_loss = kind;
      const LixpLoss l = lixp_loss(x, t, temps, cfg);
      CHECK(l.total.value().item() == base_loss(kind, x, t, temps, TauSlot::tau1).value().item());
      CHECK(l.base_term == l.total.value().item());
    }
  }
}

TEST_CASE("lixp_loss: defaults and composition") {
  const LixpConfig cfg;
  CHECK(cfg.alpha == 0.9);
  CHECK(cfg.residual_alpha == 0.9);
  CHECK(cfg.base_loss == BaseLoss::siglip);
  CHECK(cfg.self_mask);
  CHECK(cfg.qk_normalized);
  ad::Graph g;
  const TemperatureSet temps = fixed_temps(g, 1.0, 10.0, 4.0);
  const EmbeddingBatch x = make_embedding(g.parameter(testing::random_array(6, 4, 1)));
  const EmbeddingBatch t = make_embedding(g.parameter(testing::random_array(6, 4, 2)));
  const LixpLoss l = lixp_loss(x, t, temps, cfg);
  const EmbeddingBatch ctx = contextualize(x, build_in_batch_buffer(x, t, cfg), temps);
  const double ctx_ref = siglip_loss(ctx, t, temps, TauSlot::tau2).value().item();
  CHECK(l.ctx_term == ctx_ref);
  CHECK(l.total.value().item() == doctest::Approx(0.9 * l.base_term + 0.1 * ctx_ref).epsilon(1e-14));

  LixpConfig res = cfg;
  res.variant = ContextVariant::residual;
  const LixpLoss r = lixp_loss(x, t, temps, res);
  Array2 mixed(6, 4);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    mixed.data()[i] = 0.9 * x.normalized.value().data()[i] + 0.1 * ctx.normalized.value().data()[i];
  }
  const double res_ref = siglip_loss(make_embedding(g.constant(mixed)), t, temps, TauSlot::tau1).value().item();
  CHECK(r.total.value().item() == doctest::Approx(res_ref).epsilon(1e-13));

  LixpConfig off = cfg;
  off.contextual = false;
  const LixpLoss b = lixp_loss(x, t, temps, off);
  CHECK(std::isnan(b.ctx_term));
  CHECK(b.total.value().item() == b.base_term);
}

TEST_CASE("lixp_loss: gradcheck over encoder parameters and temperatures") {
  for (BaseLoss kind : {BaseLoss::clip, BaseLoss::siglip}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const std::vector<Array2> params{testing::random_array(3, 4, seed),      testing::random_array(1, 4, seed + 1),
                                       testing::random_array(3, 4, seed + 2),  testing::random_array(1, 4, seed + 3),
                                       Array2::scalar(std::log(3.0)),         Array2::scalar(std::log(2.0)),
                                       Array2::scalar(std::log(0.5)),         Array2::scalar(-1.0)};
      const Array2 xin = testing::random_array(6, 3, seed + 40);
      const Array2 tin = testing::random_array(6, 3, seed + 41);
      const auto build = [&](ad::Graph& g, std::span<const ad::Var> v) {
        const EmbeddingBatch x = make_embedding(ad::add_row(ad::matmul(g.constant(xin), v[0]), v[1]));
        const EmbeddingBatch t = make_embedding(ad::add_row(ad::matmul(g.constant(tin), v[2]), v[3]));
        const TemperatureSet temps{v[4], v[5], v[6], v[7]};
        LixpConfig cfg;
        cfg.base_loss = kind;
        return lixp_loss(x, t, temps, cfg).total;
      };
      const GradcheckResult r = gradcheck(build, params);
      INFO(to_string(kind), " seed ", seed);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}
