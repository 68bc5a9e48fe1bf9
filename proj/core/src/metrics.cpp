// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "tlearn/errors.hpp"

namespace tlearn {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
  if (a == 0) throw ValidationError("empty input");
}

}  // namespace

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth) {
  check_lengths(predicted.size(), truth.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double macro_f1(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth,
                std::size_t class_count) {
  check_lengths(predicted.size(), truth.size());
  if (class_count == 0) throw ValidationError("class_count must be positive");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] >= class_count || truth[i] >= class_count) {
      throw ValidationError("label out of range " + std::to_string(class_count));
    }
  }

  double f1_sum = 0.0;
  for (std::uint32_t c = 0; c < class_count; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const bool pred_c = predicted[i] == c;
      const bool true_c = truth[i] == c;
      if (pred_c && true_c) ++tp;
      if (pred_c && !true_c) ++fp;
      if (!pred_c && true_c) ++fn;
    }
    // Absent classes (no predictions, no truth) contribute 0.
    const double denom = static_cast<double>(2 * tp + fp + fn);
    f1_sum += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
  }
  return f1_sum / static_cast<double>(class_count);
}

double auc(std::span<const double> scores, std::span<const std::uint32_t> labels) {
  check_lengths(scores.size(), labels.size());
  std::size_t positives = 0;
  for (std::uint32_t l : labels) {
    if (l > 1) throw ValidationError("auc expects binary labels 0/1");
    positives += l;
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("auc undefined: only one class present");
  }

  // Average ranks with tie correction, then the Mann-Whitney statistic.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace tlearn
