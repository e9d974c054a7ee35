// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lixp/autodiff.hpp"
#include "lixp/parameters.hpp"

namespace lixp {

enum class Nonlinearity { tanh, relu };

Nonlinearity parse_nonlinearity(std::string_view s);
std::string_view to_string(Nonlinearity n);

/// Paired raw / unit-norm views of a batch of representations.
struct EmbeddingBatch {
  ad::Var raw;
  ad::Var normalized;

  [[nodiscard]] std::size_t rows() const { return raw.rows(); }
  [[nodiscard]] std::size_t dim() const { return raw.cols(); }
};

/// normalized = row_normalize(raw).
EmbeddingBatch make_embedding(ad::Var raw);

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 2;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stack of dense layers `prefix.w{i}` (fan_in x fan_out) and `prefix.b{i}`
/// (1 x fan_out). Hidden layers apply the nonlinearity, the last layer is
/// linear. Weights and biases start uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
struct DenseStack {
  std::string prefix;
  std::size_t input_dim = 0;
  std::vector<std::size_t> widths;
  Nonlinearity nonlinearity = Nonlinearity::tanh;

  void init_parameters(ParameterStore& store, std::uint64_t seed) const;
  [[nodiscard]] ad::Var forward(const BoundParameters& params, ad::Var x) const;
};

/// Small multilayer perceptron standing in for an image or text tower.
class Encoder {
 public:
  Encoder(std::string name, EncoderConfig config);

  [[nodiscard]] const std::string& name() const noexcept { return stack_.prefix; }
  [[nodiscard]] const EncoderConfig& config() const noexcept { return config_; }

  void init_parameters(ParameterStore& store) const;
  /// Differentiable forward pass; throws DimensionError when inputs.cols() != input_dim.
  [[nodiscard]] EmbeddingBatch encode(const BoundParameters& params, ad::Var inputs) const;
  /// Forward pass outside of training, returning unit-norm rows.
  [[nodiscard]] Array2 embed(const ParameterStore& store, const Array2& inputs) const;

 private:
  EncoderConfig config_;
  DenseStack stack_;
};

}  // namespace lixp
