// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cmath>
#include <vector>

#include "tlearn/data.hpp"
#include "tlearn/nn.hpp"
#include "tlearn/rng.hpp"

namespace tlearn::test {

/// Independent scalar-loop reference for a * b^T; kept deliberately separate
/// from the library kernels.
inline Matrix reference_matmul_bt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a.data[i * a.cols + k] * b.data[j * b.cols + k];
      out.data[i * out.cols + j] = acc;
    }
  }
  return out;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-scale, scale);
  return m;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Max relative error between analytic and numeric parameter gradients.
inline double max_grad_rel_err(const GradientSet& analytic, const GradientSet& numeric) {
  double worst = 0.0;
  for (std::size_t l = 0; l < analytic.weight_grads.size(); ++l) {
    for (std::size_t i = 0; i < analytic.weight_grads[l].size(); ++i) {
      worst = std::max(worst,
                       rel_err(analytic.weight_grads[l].data[i], numeric.weight_grads[l].data[i]));
    }
    for (std::size_t i = 0; i < analytic.bias_grads[l].size(); ++i) {
      worst = std::max(worst, rel_err(analytic.bias_grads[l][i], numeric.bias_grads[l][i]));
    }
  }
  return worst;
}

/// Random architecture within desk-scale bounds (<=4 layers, widths <=16).
inline std::vector<LayerSpec> random_layer_spec(Rng& rng, std::size_t in_dim, std::size_t out_dim,
                                                Activation hidden, Activation final) {
  const std::size_t depth = 1 + rng.next_index(4);
  std::vector<LayerSpec> spec;
  std::size_t width = in_dim;
  for (std::size_t l = 0; l + 1 < depth; ++l) {
    const std::size_t next = 1 + rng.next_index(16);
    spec.push_back({width, next, hidden});
    width = next;
  }
  spec.push_back({width, out_dim, final});
  return spec;
}

inline Matrix one_hot_rows(Rng& rng, std::size_t rows, std::size_t classes) {
  std::vector<std::uint32_t> labels(rows);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.next_index(classes));
  return one_hot(labels, classes);
}

inline Dataset tiny_blobs(std::size_t n, std::size_t features, std::size_t classes,
                          std::uint64_t seed, double spread = 0.5) {
  return gen_synthetic(n, features, classes, spread, seed);
}

}  // namespace tlearn::test
