// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lixp/array.hpp"
#include "lixp/autodiff.hpp"

namespace lixp {

/// Named learnable arrays in insertion order. Insertion order is the
/// iteration order everywhere (optimizer, checkpoint, gradient norm), which
/// keeps training bitwise reproducible.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Array2 value;
  };

  /// Throws std::invalid_argument on a duplicate name.
  void add(std::string name, Array2 value);
  [[nodiscard]] bool contains(std::string_view name) const noexcept;
  [[nodiscard]] Array2& at(std::string_view name);
  [[nodiscard]] const Array2& at(std::string_view name) const;

  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t scalar_count() const noexcept;
  [[nodiscard]] std::vector<Entry>& entries() noexcept { return entries_; }
  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }

  friend bool operator==(const ParameterStore&, const ParameterStore&);

 private:
  std::vector<Entry> entries_;
};

bool operator==(const ParameterStore::Entry& a, const ParameterStore::Entry& b);

/// One graph leaf per stored parameter.
class BoundParameters {
 public:
  BoundParameters(ad::Graph& graph, const ParameterStore& store);
  /// Binds existing leaves, one per stored name and in store order.
  BoundParameters(ad::Graph& graph, const ParameterStore& store, std::span<const ad::Var> leaves);

  [[nodiscard]] ad::Var operator[](std::string_view name) const;
  [[nodiscard]] bool contains(std::string_view name) const noexcept;
  /// Gradients after backward(), in store order.
  [[nodiscard]] std::vector<Array2> gradients() const;
  [[nodiscard]] ad::Graph& graph() const noexcept { return *graph_; }

 private:
  ad::Graph* graph_;
  std::vector<std::string> names_;
  std::vector<ad::Var> vars_;
};

}  // namespace lixp
