// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/array.hpp"

#include <algorithm>
#include <cmath>

namespace lixp {

Array2::Array2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Array2::Array2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Array2: buffer of length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Array2 Array2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Array2::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Array2(r, c, std::move(data));
}

Array2 Array2::identity(std::size_t n) {
  Array2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

double Array2::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw DimensionError("Array2::item: expected 1x1, got " + shape_string());
  }
  return data_[0];
}

std::string Array2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_shape(bool ok, const char* what, const Array2& a, const Array2& b) {
  if (!ok) {
    throw DimensionError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

Array2 matmul(const Array2& a, const Array2& b) {
  require_shape(a.cols() == b.rows(), "matmul", a, b);
  Array2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Array2 matmul_nt(const Array2& a, const Array2& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  Array2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Array2 matmul_tn(const Array2& a, const Array2& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn", a, b);
  Array2 out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto a_row = a.row(k);
    const auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Array2 transpose(const Array2& a) {
  Array2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Array2 select_rows(const Array2& a, std::span<const std::size_t> indices) {
  Array2 out(indices.size(), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) {
      throw std::out_of_range("select_rows: index " + std::to_string(indices[i]) +
                              " out of range for " + a.shape_string());
    }
    std::ranges::copy(a.row(indices[i]), out.row(i).begin());
  }
  return out;
}

Array2 concat_rows(const Array2& a, const Array2& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  require_shape(a.cols() == b.cols(), "concat_rows", a, b);
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Array2(a.rows() + b.rows(), a.cols(), std::move(data));
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

Array2 row_normalized(const Array2& a, double eps) {
  Array2 out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double n = std::max(eps, norm(a.row(i)));
    for (double& v : out.row(i)) v /= n;
  }
  return out;
}

double max_abs_diff(const Array2& a, const Array2& b) {
  require_shape(a.same_shape(b), "max_abs_diff", a, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace lixp
