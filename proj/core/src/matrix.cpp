// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/matrix.hpp"

#include <cmath>

#include "tlearn/errors.hpp"

namespace tlearn {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

void require(bool ok, const std::string& what, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw DimensionError(what + ": shapes " + shape_str(a) + " and " + shape_str(b));
  }
}

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
  Matrix m;
  m.rows = rows_init.size();
  m.cols = rows_init.size() == 0 ? 0 : rows_init.begin()->size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows_init) {
    if (r.size() != m.cols) throw DimensionError("ragged initializer rows");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul", a, b);
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, "matmul_bt", a, b);
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "matmul_at", a, b);
  Matrix out(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.rows; ++k) acc += a(k, i) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows && a.cols == b.cols, "hadamard", a, b);
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows && a.cols == b.cols, "add", a, b);
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows && a.cols == b.cols, "sub", a, b);
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * s;
  return out;
}

void add_row_inplace(Matrix& m, std::span<const double> v) {
  if (v.size() != m.cols) {
    throw DimensionError("add_row_inplace: vector length " + std::to_string(v.size()) +
                         " vs " + std::to_string(m.cols) + " columns");
  }
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) += v[j];
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> sums(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) sums[j] += m(i, j);
  return sums;
}

double max_abs(const Matrix& m) {
  double mx = 0.0;
  for (double v : m.data) mx = std::max(mx, std::abs(v));
  return mx;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows && a.cols == b.cols, "max_abs_diff", a, b);
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
  return mx;
}

Matrix gather_rows(const Matrix& src, std::span<const std::uint32_t> row_ids) {
  Matrix out(row_ids.size(), src.cols);
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    if (row_ids[i] >= src.rows) {
      throw IntegrityError("gather_rows: row " + std::to_string(row_ids[i]) + " out of range " +
                           std::to_string(src.rows));
    }
    auto s = src.row(row_ids[i]);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

void check_finite(const Matrix& m, const std::string& context) {
  for (double v : m.data) {
    if (!std::isfinite(v)) throw ValidationError("non-finite value in " + context);
  }
}

}  // namespace tlearn
