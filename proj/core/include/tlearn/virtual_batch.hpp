// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tlearn {

// Virtual batch creation: index-range retrieval, global re-indexing,
// shuffling, and traversal-plan generation. This module only ever sees
// per-node sample counts; no feature or label values can reach it.

struct IndexRangeReport {
  std::uint32_t node_id = 0;
  std::uint32_t sample_count = 0;  // local indices are [0, sample_count)
};

/// Bijection between global sample ids [0, N) and (node, local index) pairs.
struct GlobalIndexMap {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> forward;  // gid -> (node, local)
  std::vector<std::vector<std::uint32_t>> reverse;               // [node][local] -> gid

  std::size_t total() const { return forward.size(); }
  std::pair<std::uint32_t, std::uint32_t> locate(std::uint32_t gid) const;
  std::uint32_t global_id(std::uint32_t node, std::uint32_t local) const;
  /// Throws IntegrityError unless forward and reverse are mutual inverses.
  void validate() const;
};

struct VirtualBatch {
  std::uint32_t batch_id = 0;
  std::vector<std::uint32_t> global_ids;
};

/// One node visit within a batch: which local rows the node contributes and
/// where each row lands in the reassembled batch matrix. batch_size is the
/// full virtual batch size, the loss denominator on nodes.
struct TraversalStep {
  std::uint32_t node_id = 0;
  std::uint32_t batch_id = 0;
  std::uint32_t batch_size = 0;
  std::vector<std::uint32_t> local_indices;
  std::vector<std::uint32_t> positions;
};

struct BatchPlan {
  std::uint32_t batch_id = 0;
  std::uint32_t batch_size = 0;
  std::vector<TraversalStep> steps;  // visit order: first occurrence in the shuffle
};

struct TraversalPlan {
  std::vector<BatchPlan> batches;
};

/// One report per node in node-id order. Zero-sample nodes are rejected.
std::vector<IndexRangeReport> collect_index_ranges(std::span<const std::uint32_t> sample_counts);

/// Sequential assignment by (node order, local index); with randomize_ids the
/// sequential ids are composed with a seeded permutation of [0, N).
GlobalIndexMap build_global_index(std::span<const IndexRangeReport> reports, bool randomize_ids,
                                  std::uint64_t seed);

/// Seeded Fisher-Yates permutation of all ids, cut into consecutive chunks.
/// The final short batch is kept.
std::vector<VirtualBatch> shuffle_into_batches(const GlobalIndexMap& map, std::size_t batch_size,
                                               std::uint64_t seed);

TraversalPlan generate_traversal_plan(std::span<const VirtualBatch> batches,
                                      const GlobalIndexMap& map);

}  // namespace tlearn
