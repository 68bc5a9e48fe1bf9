// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tlearn {

// Row-major dense matrix of 64-bit floats, samples as rows throughout the
// project. All kernels below run fixed-order single-threaded loops so that
// repeated evaluations are bit-identical (no SIMD/threading reassociation).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // length rows * cols

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool empty() const { return rows == 0 || cols == 0; }
  std::size_t size() const { return rows * cols; }

  bool operator==(const Matrix& other) const = default;
};

/// a (m x k) times b (k x n).
Matrix matmul(const Matrix& a, const Matrix& b);

/// a (m x k) times b^T where b is (n x k). Forward passes use this as X * W^T.
Matrix matmul_bt(const Matrix& a, const Matrix& b);

/// a^T (k x m -> m x k transposed view) times b (k x n). Weight gradients use
/// this as delta^T * X.
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Elementwise (Hadamard) product.
Matrix hadamard(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

/// Adds v to every row of m in place.
void add_row_inplace(Matrix& m, std::span<const double> v);

/// Per-column sums, length m.cols.
std::vector<double> column_sums(const Matrix& m);

double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Copies the given rows of src, in the given order.
Matrix gather_rows(const Matrix& src, std::span<const std::uint32_t> row_ids);

/// Throws ValidationError naming `context` if any entry is NaN or infinite.
void check_finite(const Matrix& m, const std::string& context);

}  // namespace tlearn
