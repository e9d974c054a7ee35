// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/parameters.hpp"

#include <algorithm>
#include <stdexcept>

namespace lixp {

void ParameterStore::add(std::string name, Array2 value) {
  if (contains(name)) throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
  entries_.push_back(Entry{std::move(name), std::move(value)});
}

bool ParameterStore::contains(std::string_view name) const noexcept {
  return std::ranges::any_of(entries_, [&](const Entry& e) { return e.name == name; });
}

Array2& ParameterStore::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw std::out_of_range("ParameterStore: no parameter '" + std::string(name) + "'");
}

const Array2& ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool operator==(const ParameterStore::Entry& a, const ParameterStore::Entry& b) {
  return a.name == b.name && a.value == b.value;
}

bool operator==(const ParameterStore& a, const ParameterStore& b) { return a.entries_ == b.entries_; }

BoundParameters::BoundParameters(ad::Graph& graph, const ParameterStore& store) : graph_(&graph) {
  for (const auto& e : store.entries()) {
    names_.push_back(e.name);
    vars_.push_back(graph.parameter(e.value));
  }
}

BoundParameters::BoundParameters(ad::Graph& graph, const ParameterStore& store, std::span<const ad::Var> leaves)
    : graph_(&graph), vars_(leaves.begin(), leaves.end()) {
  if (leaves.size() != store.size()) {
    throw std::invalid_argument("BoundParameters: " + std::to_string(leaves.size()) + " leaves for " +
                                std::to_string(store.size()) + " parameters");
  }
  for (const auto& e : store.entries()) names_.push_back(e.name);
}

ad::Var BoundParameters::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return vars_[i];
  }
  throw std::out_of_range("BoundParameters: no parameter '" + std::string(name) + "'");
}

bool BoundParameters::contains(std::string_view name) const noexcept {
  return std::ranges::find(names_, name) != names_.end();
}

std::vector<Array2> BoundParameters::gradients() const {
  std::vector<Array2> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(v.grad());
  return out;
}

}  // namespace lixp
