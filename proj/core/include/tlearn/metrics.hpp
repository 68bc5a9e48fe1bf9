// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tlearn {

struct EvalResult {
  std::string metric;
  double value = 0.0;  // always in [0, 1]
  std::vector<std::size_t> support;  // true-label counts per class
};

/// Fraction of exact matches.
double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth);

/// Unweighted mean of per-class F1. A class with no predicted and no true
/// positives contributes F1 = 0.
double macro_f1(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth,
                std::size_t class_count);

/// Probability that a random positive outranks a random negative, ties
/// counted 0.5 (Mann-Whitney). Computed from average ranks, so it is exact
/// and invariant under strictly monotone score transforms. Throws MetricError
/// when only one class is present.
double auc(std::span<const double> scores, std::span<const std::uint32_t> labels);

}  // namespace tlearn
