// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include <doctest.h>

#include "tlearn/errors.hpp"
#include "tlearn/matrix.hpp"
#include "test_support.hpp"

using namespace tlearn;

TEST_CASE("matmul variants agree with the scalar reference") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.next_index(6);
    const std::size_t k = 1 + rng.next_index(6);
    const std::size_t n = 1 + rng.next_index(6);
    const Matrix a = test::random_matrix(rng, m, k);
    const Matrix b = test::random_matrix(rng, n, k);

    const Matrix want = test::reference_matmul_bt(a, b);
    CHECK(matmul_bt(a, b) == want);
    CHECK(matmul(a, transpose(b)) == want);
    CHECK(matmul_at(transpose(a), transpose(b)) == want);
  }
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
  Matrix a(2, 3), b(2, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), DimensionError);
}

TEST_CASE("column sums and row broadcast") {
  Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const auto sums = column_sums(m);
  CHECK(sums == std::vector<double>{4.0, 6.0});

  const double bias[] = {10.0, 20.0};
  add_row_inplace(m, bias);
  CHECK(m == Matrix::from_rows({{11.0, 22.0}, {13.0, 24.0}}));
}

TEST_CASE("gather_rows picks rows in order and validates ids") {
  const Matrix m = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
  const std::uint32_t ids[] = {2, 0};
  CHECK(gather_rows(m, ids) == Matrix::from_rows({{3.0}, {1.0}}));

  const std::uint32_t bad[] = {3};
  CHECK_THROWS_AS(gather_rows(m, bad), IntegrityError);
}

TEST_CASE("check_finite rejects NaN") {
  Matrix m(1, 1);
  m.data[0] = std::nan("");
  CHECK_THROWS_AS(check_finite(m, "test"), ValidationError);
}

TEST_CASE("max_abs_diff") {
  const Matrix a = Matrix::from_rows({{1.0, -2.0}});
  const Matrix b = Matrix::from_rows({{1.5, -2.25}});
  CHECK(max_abs_diff(a, b) == doctest::Approx(0.5));
}
