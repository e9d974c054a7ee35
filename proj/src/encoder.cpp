// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "lixp/rng.hpp"

namespace lixp {

Nonlinearity parse_nonlinearity(std::string_view s) {
  if (s == "tanh") return Nonlinearity::tanh;
  if (s == "relu") return Nonlinearity::relu;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(s) + "' (expected tanh|relu)");
}

std::string_view to_string(Nonlinearity n) { return n == Nonlinearity::tanh ? "tanh" : "relu"; }

EmbeddingBatch make_embedding(ad::Var raw) { return EmbeddingBatch{raw, ad::row_normalize(raw)}; }

void EncoderConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("EncoderConfig: input_dim must be positive");
  if (output_dim < 2) throw std::invalid_argument("EncoderConfig: output_dim must be >= 2");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("EncoderConfig: hidden widths must be positive");
  }
}

void DenseStack::init_parameters(ParameterStore& store, std::uint64_t seed) const {
  Rng rng(seed);
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Array2 w(fan_in, widths[l]);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    Array2 b(1, widths[l]);
    for (double& v : b.data()) v = rng.uniform(-bound, bound);
    store.add(prefix + ".w" + std::to_string(l), std::move(w));
    store.add(prefix + ".b" + std::to_string(l), std::move(b));
    fan_in = widths[l];
  }
}

ad::Var DenseStack::forward(const BoundParameters& params, ad::Var x) const {
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::string idx = std::to_string(l);
    x = ad::add_row(ad::matmul(x, params[prefix + ".w" + idx]), params[prefix + ".b" + idx]);
    if (l + 1 < widths.size()) {
      x = nonlinearity == Nonlinearity::tanh ? ad::tanh(x) : ad::relu(x);
    }
  }
  return x;
}

Encoder::Encoder(std::string name, EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  stack_.prefix = std::move(name);
  stack_.input_dim = config_.input_dim;
  stack_.widths = config_.hidden_dims;
  stack_.widths.push_back(config_.output_dim);
  stack_.nonlinearity = config_.nonlinearity;
}

void Encoder::init_parameters(ParameterStore& store) const {
  stack_.init_parameters(store, derive_seed(config_.seed, stream::kInit));
}

EmbeddingBatch Encoder::encode(const BoundParameters& params, ad::Var inputs) const {
  if (inputs.cols() != config_.input_dim) {
    throw DimensionError("Encoder '" + name() + "': inputs " + inputs.value().shape_string() +
                         " but input_dim is " + std::to_string(config_.input_dim));
  }
  return make_embedding(stack_.forward(params, inputs));
}

Array2 Encoder::embed(const ParameterStore& store, const Array2& inputs) const {
  ad::Graph g;
  BoundParameters bound(g, store);
  return encode(bound, g.constant(inputs)).normalized.value();
}

}  // namespace lixp
