// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lixp {

/// Raised when operand shapes are incompatible. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of 64-bit floats.
///
/// Every matrix in the library (batches, buffers, support sets, parameters)
/// is carried by this type. Reductions always run left to right so results
/// are bitwise reproducible.
class Array2 {
 public:
  Array2() = default;
  Array2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Array2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Array2 from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Array2 identity(std::size_t n);
  static Array2 scalar(double v) { return Array2(1, 1, v); }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  /// Value of a 1x1 array.
  [[nodiscard]] double item() const;

  [[nodiscard]] bool same_shape(const Array2& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  [[nodiscard]] std::string shape_string() const;

  /// Exact elementwise equality (shape and every entry compare equal).
  friend bool operator==(const Array2& a, const Array2& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Plain (non-differentiable) kernels shared by the autodiff engine and the
// training-free classifiers.

Array2 matmul(const Array2& a, const Array2& b);
/// a * b^T without materializing the transpose.
Array2 matmul_nt(const Array2& a, const Array2& b);
/// a^T * b without materializing the transpose.
Array2 matmul_tn(const Array2& a, const Array2& b);
Array2 transpose(const Array2& a);
Array2 select_rows(const Array2& a, std::span<const std::size_t> indices);
Array2 concat_rows(const Array2& a, const Array2& b);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm(std::span<const double> a) noexcept;

/// Rows divided by max(eps, row norm).
Array2 row_normalized(const Array2& a, double eps);

/// Largest absolute entrywise difference. Shapes must match.
double max_abs_diff(const Array2& a, const Array2& b);

/// Throws DimensionError("<what>: AxB vs CxD") when the predicate fails.
void require_shape(bool ok, const char* what, const Array2& a, const Array2& b);

}  // namespace lixp
