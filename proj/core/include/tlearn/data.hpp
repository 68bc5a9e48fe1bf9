// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tlearn/matrix.hpp"

namespace tlearn {

struct Dataset {
  Matrix features;                   // n_samples x n_features
  std::vector<std::uint32_t> labels; // class ids, one per row
  std::size_t class_count = 0;

  std::size_t size() const { return features.rows; }
  void validate() const;
};

struct NodeShard {
  std::uint32_t node_id = 0;
  Dataset dataset;  // local indices are dense [0, dataset.size())

  std::size_t size() const { return dataset.size(); }
};

enum class PartitionStrategy : std::uint8_t { iid, label_skew, kmeans };

struct PartitionSpec {
  PartitionStrategy strategy = PartitionStrategy::iid;
  std::size_t node_count = 1;
  std::uint64_t seed = 0;
  std::size_t shards_per_node = 1;   // label_skew
  std::size_t kmeans_k = 0;          // 0 means node_count
  std::size_t kmeans_max_iters = 100;
};

/// Gaussian blobs: one seeded centroid per class on the unit hypersphere
/// scaled by 4, labels assigned round-robin so per-class counts balance
/// within +-1. Deterministic per seed.
Dataset gen_synthetic(std::size_t n_samples, std::size_t n_features, std::size_t n_classes,
                      double cluster_spread, std::uint64_t seed);

/// IDX image/label pair (big-endian dims, magics 0x803/0x801). Pixels scaled
/// to [0,1]; images flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CSV with a header row, comma separated, no quoting. Label cells map to a
/// dense class dictionary in first-appearance order; all other cells must
/// parse as numbers.
Dataset load_csv(const std::string& path, const std::string& label_column);

std::vector<NodeShard> partition(const Dataset& dataset, const PartitionSpec& spec);

/// Contiguous cut into explicit shard sizes (must sum to the dataset size).
std::vector<NodeShard> partition_by_sizes(const Dataset& dataset,
                                          std::span<const std::size_t> sizes);

/// Lloyd's algorithm with seeded distinct-sample initial centroids. Ties in
/// nearest-centroid break toward the lowest centroid index. When given,
/// objective_trace receives the clustering objective after every assignment
/// step (a non-increasing sequence).
std::vector<std::uint32_t> kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                                  std::size_t max_iters,
                                  std::vector<double>* objective_trace = nullptr);

/// Sum of squared distances to assigned centroids (the kmeans objective).
double kmeans_objective(const Matrix& points, std::span<const std::uint32_t> assignments,
                        std::size_t k);

/// Shards concatenated in node order; row g of the result is the sample at
/// the g-th (node, local) pair under sequential global indexing.
Dataset concat_shards(std::span<const NodeShard> shards);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

TrainTestSplit split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// Per-column zero-mean unit-variance transform, fitted on the train split
/// only. Constant columns are left unscaled.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& features);
  void apply(Matrix& features) const;
};

}  // namespace tlearn
