// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lixp/array.hpp"

namespace lixp::ad {

/// Guard used by row normalization for zero rows.
inline constexpr double kNormEps = 1e-12;

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
/// owning Graph is alive.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  [[nodiscard]] const Array2& value() const;
  [[nodiscard]] const Array2& grad() const;
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] std::size_t rows() const { return value().rows(); }
  [[nodiscard]] std::size_t cols() const { return value().cols(); }
};

/// Tape of recorded operations.
///
/// Nodes are appended in evaluation order; backward() walks them in exact
/// reverse recording order, so gradients are bitwise reproducible. A Graph is
/// single-threaded; independent Graphs share no state.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that receives a gradient.
  Var parameter(Array2 value);
  /// Leaf that never receives a gradient.
  Var constant(Array2 value);

  /// Record an operation. `backward` is invoked only when the node requires
  /// a gradient, which is the case whenever any parent does.
  Var record(Array2 value, std::vector<std::size_t> parents, BackwardFn backward);

  /// Populate gradients of every node reachable from `loss` (1x1).
  /// Throws std::logic_error on a second call without zero_grad().
  void backward(Var loss);
  void zero_grad();

  [[nodiscard]] const Array2& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] const Array2& grad(std::size_t id) const { return nodes_[id].grad; }
  [[nodiscard]] Array2& grad_mut(std::size_t id) { return nodes_[id].grad; }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::span<const std::size_t> parameters() const noexcept { return params_; }
  [[nodiscard]] std::span<const std::size_t> parents(std::size_t id) const {
    return nodes_[id].parents;
  }

 private:
  struct Node {
    Array2 value;
    Array2 grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  // deque: references returned by value()/grad() survive later recording.
  std::deque<Node> nodes_;
  std::vector<std::size_t> params_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All operands must live on the same Graph.

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var negate(Var a);

/// a + s with s a 1x1 node broadcast to every entry.
Var add_scalar(Var a, Var s);
/// a * s with s a 1x1 node broadcast to every entry.
Var mul_scalar(Var a, Var s);
/// a + row, with `row` a 1 x a.cols() node added to every row of a.
Var add_row(Var a, Var row);

Var exp(Var a);
/// Throws std::domain_error on a non-positive entry.
Var log(Var a);
/// log(1 + e^x), evaluated as max(x, 0) + log1p(e^{-|x|}).
Var log1p_exp(Var a);
Var tanh(Var a);
Var relu(Var a);

/// Each row divided by max(eps, its Euclidean norm).
Var row_normalize(Var a, double eps = kNormEps);

/// Row-wise softmax restricted to entries where mask == 1. Masked entries are
/// excluded from the normalizer, so their output (and gradient) is exactly 0.
/// A row with no unmasked entry throws std::invalid_argument.
Var masked_softmax(Var scores, const Array2& mask);

/// log sum_j exp(a_ij) per row, shape rows x 1.
Var row_logsumexp(Var a);
/// Main diagonal of a square node, shape n x 1.
Var diagonal(Var a);

/// Per-row standardization (x - mean) / sqrt(var + eps) without affine terms.
Var layer_norm_rows(Var a, double eps = 1e-6);

/// Sum of all entries, 1x1.
Var sum(Var a);
/// Mean of all entries, 1x1.
Var mean(Var a);

Var concat_rows(Var a, Var b);
Var select_rows(Var a, std::span<const std::size_t> indices);

/// Same value, recorded as a constant: no gradient flows through it.
Var detach(Var a);

}  // namespace lixp::ad
