// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lixp::ad {

const Array2& Var::value() const { return graph->value(id); }
const Array2& Var::grad() const { return graph->grad(id); }
bool Var::requires_grad() const { return graph->requires_grad(id); }

Var Graph::parameter(Array2 value) {
  const std::size_t id = nodes_.size();
  Array2 grad(value.rows(), value.cols());
  nodes_.push_back(Node{std::move(value), std::move(grad), true, {}, {}});
  params_.push_back(id);
  return Var{this, id};
}

Var Graph::constant(Array2 value) {
  const std::size_t id = nodes_.size();
  Array2 grad(value.rows(), value.cols());
  nodes_.push_back(Node{std::move(value), std::move(grad), false, {}, {}});
  return Var{this, id};
}

Var Graph::record(Array2 value, std::vector<std::size_t> parents, BackwardFn backward) {
  bool needs = false;
  for (std::size_t p : parents) needs = needs || nodes_[p].requires_grad;
  const std::size_t id = nodes_.size();
  Array2 grad(value.rows(), value.cols());
  nodes_.push_back(Node{std::move(value), std::move(grad), needs, std::move(parents),
                        needs ? std::move(backward) : BackwardFn{}});
  return Var{this, id};
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss belongs to another graph");
  const Array2& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  if (backward_done_) {
    throw std::logic_error("backward: gradients already populated; call zero_grad() first");
  }
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
}

void Graph::zero_grad() {
  for (auto& n : nodes_) std::ranges::fill(n.grad.data(), 0.0);
  backward_done_ = false;
}

namespace {

Graph& same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) {
    throw std::invalid_argument("autodiff: operands belong to different graphs");
  }
  return *a.graph;
}

void accumulate(Graph& g, std::size_t id, const Array2& delta) {
  if (!g.requires_grad(id)) return;
  Array2& dst = g.grad_mut(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += delta.data()[i];
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Graph& g = *a.graph;
  const Array2& x = a.value();
  Array2 out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = fwd(x.data()[i]);
  const std::size_t pa = a.id;
  return g.record(std::move(out), {pa}, [pa, deriv](Graph& gr, std::size_t self) {
    const Array2& xin = gr.value(pa);
    const Array2& y = gr.value(self);
    const Array2& gy = gr.grad(self);
    Array2 d(xin.rows(), xin.cols());
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.data()[i] = gy.data()[i] * deriv(xin.data()[i], y.data()[i]);
    }
    accumulate(gr, pa, d);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  Array2 out = lixp::matmul(a.value(), b.value());
  const std::size_t pa = a.id, pb = b.id;
  return g.record(std::move(out), {pa, pb}, [pa, pb](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    if (gr.requires_grad(pa)) accumulate(gr, pa, matmul_nt(gy, gr.value(pb)));
    if (gr.requires_grad(pb)) accumulate(gr, pb, matmul_tn(gr.value(pa), gy));
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  const std::size_t pa = a.id;
  return g.record(lixp::transpose(a.value()), {pa}, [pa](Graph& gr, std::size_t self) {
    accumulate(gr, pa, lixp::transpose(gr.grad(self)));
  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_shape(a.value().same_shape(b.value()), "add", a.value(), b.value());
  Array2 out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.value().data()[i];
  const std::size_t pa = a.id, pb = b.id;
  return g.record(std::move(out), {pa, pb}, [pa, pb](Graph& gr, std::size_t self) {
    accumulate(gr, pa, gr.grad(self));
    accumulate(gr, pb, gr.grad(self));
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_shape(a.value().same_shape(b.value()), "sub", a.value(), b.value());
  Array2 out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.value().data()[i];
  const std::size_t pa = a.id, pb = b.id;
  return g.record(std::move(out), {pa, pb}, [pa, pb](Graph& gr, std::size_t self) {
    accumulate(gr, pa, gr.grad(self));
    if (gr.requires_grad(pb)) {
      Array2 neg = gr.grad(self);
      for (double& v : neg.data()) v = -v;
      accumulate(gr, pb, neg);
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_shape(a.value().same_shape(b.value()), "mul", a.value(), b.value());
  Array2 out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  const std::size_t pa = a.id, pb = b.id;
  return g.record(std::move(out), {pa, pb}, [pa, pb](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    if (gr.requires_grad(pa)) {
      Array2 d = gy;
      for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= gr.value(pb).data()[i];
      accumulate(gr, pa, d);
    }
    if (gr.requires_grad(pb)) {
      Array2 d = gy;
      for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= gr.value(pa).data()[i];
      accumulate(gr, pb, d);
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var negate(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var add_scalar(Var a, Var s) {
  Graph& g = same_graph(a, s);
  const double sv = s.value().item();
  Array2 out = a.value();
  for (double& v : out.data()) v += sv;
  const std::size_t pa = a.id, ps = s.id;
  return g.record(std::move(out), {pa, ps}, [pa, ps](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    accumulate(gr, pa, gy);
    if (gr.requires_grad(ps)) {
      double acc = 0.0;
      for (double v : gy.data()) acc += v;
      gr.grad_mut(ps)(0, 0) += acc;
    }
  });
}

Var mul_scalar(Var a, Var s) {
  Graph& g = same_graph(a, s);
  const double sv = s.value().item();
  Array2 out = a.value();
  for (double& v : out.data()) v *= sv;
  const std::size_t pa = a.id, ps = s.id;
  return g.record(std::move(out), {pa, ps}, [pa, ps](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    if (gr.requires_grad(pa)) {
      const double s_now = gr.value(ps).item();
      Array2 d = gy;
      for (double& v : d.data()) v *= s_now;
      accumulate(gr, pa, d);
    }
    if (gr.requires_grad(ps)) {
      const Array2& x = gr.value(pa);
      double acc = 0.0;
      for (std::size_t i = 0; i < gy.size(); ++i) acc += gy.data()[i] * x.data()[i];
      gr.grad_mut(ps)(0, 0) += acc;
    }
  });
}

Var add_row(Var a, Var row) {
  Graph& g = same_graph(a, row);
  require_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row", a.value(), row.value());
  Array2 out = a.value();
  const auto r = row.value().row(0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += r[j];
  }
  const std::size_t pa = a.id, pr = row.id;
  return g.record(std::move(out), {pa, pr}, [pa, pr](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    accumulate(gr, pa, gy);
    if (gr.requires_grad(pr)) {
      Array2 d(1, gy.cols());
      for (std::size_t i = 0; i < gy.rows(); ++i) {
        for (std::size_t j = 0; j < gy.cols(); ++j) d(0, j) += gy(i, j);
      }
      accumulate(gr, pr, d);
    }
  });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var log1p_exp(Var a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var row_normalize(Var a, double eps) {
  Graph& g = *a.graph;
  const Array2& x = a.value();
  Array2 out(x.rows(), x.cols());
  Array2 norms(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double n = norm(x.row(i));
    norms(i, 0) = n;
    const double denom = std::max(eps, n);
    auto o = out.row(i);
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = xi[j] / denom;
  }
  const std::size_t pa = a.id;
  return g.record(std::move(out), {pa},
                  [pa, eps, norms = std::move(norms)](Graph& gr, std::size_t self) {
                    const Array2& y = gr.value(self);
                    const Array2& gy = gr.grad(self);
                    Array2 d(y.rows(), y.cols());
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      const double n = norms(i, 0);
                      const auto yi = y.row(i);
                      const auto gi = gy.row(i);
                      auto di = d.row(i);
                      if (n > eps) {
                        // d(x/|x|) = (I - y y^T) / |x|
                        const double proj = dot(yi, gi);
                        for (std::size_t j = 0; j < di.size(); ++j) di[j] = (gi[j] - yi[j] * proj) / n;
                      } else {
                        for (std::size_t j = 0; j < di.size(); ++j) di[j] = gi[j] / eps;
                      }
                    }
                    accumulate(gr, pa, d);
                  });
}

Var masked_softmax(Var scores, const Array2& mask) {
  Graph& g = *scores.graph;
  const Array2& s = scores.value();
  require_shape(s.same_shape(mask), "masked_softmax", s, mask);
  Array2 out(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      const double m = mask(i, j);
      if (m != 0.0 && m != 1.0) {
        throw std::invalid_argument("masked_softmax: mask entries must be 0 or 1");
      }
      if (m == 1.0) {
        mx = std::max(mx, s(i, j));
        any = true;
      }
    }
    if (!any) {
      throw std::invalid_argument("masked_softmax: row " + std::to_string(i) +
                                  " has every entry masked");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (mask(i, j) == 1.0) {
        out(i, j) = std::exp(s(i, j) - mx);
        total += out(i, j);
      }
    }
    for (std::size_t j = 0; j < s.cols(); ++j) out(i, j) /= total;
  }
  const std::size_t ps = scores.id;
  return g.record(std::move(out), {ps}, [ps](Graph& gr, std::size_t self) {
    const Array2& y = gr.value(self);
    const Array2& gy = gr.grad(self);
    Array2 d(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      const double inner = dot(y.row(i), gy.row(i));
      for (std::size_t j = 0; j < y.cols(); ++j) d(i, j) = y(i, j) * (gy(i, j) - inner);
    }
    accumulate(gr, ps, d);
  });
}

Var row_logsumexp(Var a) {
  Graph& g = *a.graph;
  const Array2& x = a.value();
  if (x.cols() == 0) throw DimensionError("row_logsumexp: no columns in " + x.shape_string());
  Array2 out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    const double mx = *std::ranges::max_element(xi);
    double total = 0.0;
    for (double v : xi) total += std::exp(v - mx);
    out(i, 0) = mx + std::log(total);
  }
  const std::size_t pa = a.id;
  return g.record(std::move(out), {pa}, [pa](Graph& gr, std::size_t self) {
    const Array2& xin = gr.value(pa);
    const Array2& y = gr.value(self);
    const Array2& gy = gr.grad(self);
    Array2 d(xin.rows(), xin.cols());
    for (std::size_t i = 0; i < xin.rows(); ++i) {
      for (std::size_t j = 0; j < xin.cols(); ++j) {
        d(i, j) = gy(i, 0) * std::exp(xin(i, j) - y(i, 0));
      }
    }
    accumulate(gr, pa, d);
  });
}

Var diagonal(Var a) {
  Graph& g = *a.graph;
  const Array2& x = a.value();
  if (x.rows() != x.cols()) throw DimensionError("diagonal: expected square, got " + x.shape_string());
  Array2 out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) out(i, 0) = x(i, i);
  const std::size_t pa = a.id;
  return g.record(std::move(out), {pa}, [pa](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    Array2 d(gy.rows(), gy.rows());
    for (std::size_t i = 0; i < gy.rows(); ++i) d(i, i) = gy(i, 0);
    accumulate(gr, pa, d);
  });
}

Var layer_norm_rows(Var a, double eps) {
  Graph& g = *a.graph;
  const Array2& x = a.value();
  const auto n = static_cast<double>(x.cols());
  Array2 out(x.rows(), x.cols());
  Array2 inv_std(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    double mu = 0.0;
    for (double v : xi) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : xi) var += (v - mu) * (v - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = (xi[j] - mu) * is;
  }
  const std::size_t pa = a.id;
  return g.record(std::move(out), {pa},
                  [pa, inv_std = std::move(inv_std)](Graph& gr, std::size_t self) {
                    const Array2& y = gr.value(self);
                    const Array2& gy = gr.grad(self);
                    const auto cols = static_cast<double>(y.cols());
                    Array2 d(y.rows(), y.cols());
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      double mean_g = 0.0;
                      double mean_gy = 0.0;
                      for (std::size_t j = 0; j < y.cols(); ++j) {
                        mean_g += gy(i, j);
                        mean_gy += gy(i, j) * y(i, j);
                      }
                      mean_g /= cols;
                      mean_gy /= cols;
                      for (std::size_t j = 0; j < y.cols(); ++j) {
                        d(i, j) = inv_std(i, 0) * (gy(i, j) - mean_g - y(i, j) * mean_gy);
                      }
                    }
                    accumulate(gr, pa, d);
                  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const std::size_t pa = a.id;
  return g.record(Array2::scalar(acc), {pa}, [pa](Graph& gr, std::size_t self) {
    const Array2& xin = gr.value(pa);
    accumulate(gr, pa, Array2(xin.rows(), xin.cols(), gr.grad(self).item()));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionError("mean: empty operand");
  return scale(sum(a), 1.0 / n);
}

Var concat_rows(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const std::size_t ra = a.rows();
  const std::size_t pa = a.id, pb = b.id;
  return g.record(lixp::concat_rows(a.value(), b.value()), {pa, pb},
                  [pa, pb, ra](Graph& gr, std::size_t self) {
                    const Array2& gy = gr.grad(self);
                    const std::size_t c = gy.cols();
                    if (gr.requires_grad(pa)) {
                      Array2 d(ra, c);
                      std::copy_n(gy.data().begin(), ra * c, d.data().begin());
                      accumulate(gr, pa, d);
                    }
                    if (gr.requires_grad(pb)) {
                      Array2 d(gy.rows() - ra, c);
                      std::copy(gy.data().begin() + static_cast<std::ptrdiff_t>(ra * c),
                                gy.data().end(), d.data().begin());
                      accumulate(gr, pb, d);
                    }
                  });
}

Var select_rows(Var a, std::span<const std::size_t> indices) {
  Graph& g = *a.graph;
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Array2 out = lixp::select_rows(a.value(), idx);
  const std::size_t pa = a.id;
  return g.record(std::move(out), {pa}, [pa, idx = std::move(idx)](Graph& gr, std::size_t self) {
    const Array2& gy = gr.grad(self);
    const Array2& xin = gr.value(pa);
    Array2 d(xin.rows(), xin.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) d(idx[i], j) += gy(i, j);
    }
    accumulate(gr, pa, d);
  });
}

Var detach(Var a) { return a.graph->constant(a.value()); }

}  // namespace lixp::ad
