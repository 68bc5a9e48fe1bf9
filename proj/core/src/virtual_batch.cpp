// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/virtual_batch.hpp"

#include <algorithm>
#include <string>

#include "tlearn/errors.hpp"
#include "tlearn/rng.hpp"

namespace tlearn {

std::pair<std::uint32_t, std::uint32_t> GlobalIndexMap::locate(std::uint32_t gid) const {
  if (gid >= forward.size()) {
    throw IntegrityError("global id " + std::to_string(gid) + " out of range " +
                         std::to_string(forward.size()));
  }
  return forward[gid];
}

std::uint32_t GlobalIndexMap::global_id(std::uint32_t node, std::uint32_t local) const {
  if (node >= reverse.size() || local >= reverse[node].size()) {
    throw IntegrityError("no sample (" + std::to_string(node) + ", " + std::to_string(local) + ")");
  }
  return reverse[node][local];
}

void GlobalIndexMap::validate() const {
  std::size_t total_reverse = 0;
  for (const auto& node : reverse) total_reverse += node.size();
  if (total_reverse != forward.size()) {
    throw IntegrityError("index map entry counts disagree");
  }
  for (std::uint32_t gid = 0; gid < forward.size(); ++gid) {
    const auto [node, local] = forward[gid];
    if (node >= reverse.size() || local >= reverse[node].size() || reverse[node][local] != gid) {
      throw IntegrityError("index map is not a bijection at global id " + std::to_string(gid));
    }
  }
}

std::vector<IndexRangeReport> collect_index_ranges(std::span<const std::uint32_t> sample_counts) {
  if (sample_counts.empty()) throw ConfigError("no nodes");
  std::vector<IndexRangeReport> reports;
  reports.reserve(sample_counts.size());
  for (std::size_t n = 0; n < sample_counts.size(); ++n) {
    if (sample_counts[n] == 0) {
      throw ConfigError("node " + std::to_string(n) + " reports zero samples");
    }
    reports.push_back({static_cast<std::uint32_t>(n), sample_counts[n]});
  }
  return reports;
}

GlobalIndexMap build_global_index(std::span<const IndexRangeReport> reports, bool randomize_ids,
                                  std::uint64_t seed) {
  if (reports.empty()) throw ConfigError("no index range reports");
  std::size_t total = 0;
  for (const auto& r : reports) {
    if (r.sample_count == 0) {
      throw ConfigError("node " + std::to_string(r.node_id) + " reports zero samples");
    }
    total += r.sample_count;
  }

  std::vector<std::uint32_t> ids(total);
  for (std::size_t i = 0; i < total; ++i) ids[i] = static_cast<std::uint32_t>(i);
  if (randomize_ids) {
    Rng rng(seed);
    rng.shuffle(ids);
  }

  GlobalIndexMap map;
  map.forward.resize(total);
  std::uint32_t max_node = 0;
  for (const auto& r : reports) max_node = std::max(max_node, r.node_id);
  map.reverse.resize(max_node + 1);

  std::size_t next = 0;
  for (const auto& r : reports) {
    map.reverse[r.node_id].resize(r.sample_count);
    for (std::uint32_t local = 0; local < r.sample_count; ++local) {
      const std::uint32_t gid = ids[next++];
      map.forward[gid] = {r.node_id, local};
      map.reverse[r.node_id][local] = gid;
    }
  }
  map.validate();
  return map;
}

std::vector<VirtualBatch> shuffle_into_batches(const GlobalIndexMap& map, std::size_t batch_size,
                                               std::uint64_t seed) {
  if (batch_size == 0) throw ValidationError("batch_size must be at least 1");
  Rng rng(seed);
  const auto perm = rng.permutation(map.total());

  std::vector<VirtualBatch> batches;
  for (std::size_t start = 0; start < perm.size(); start += batch_size) {
    VirtualBatch b;
    b.batch_id = static_cast<std::uint32_t>(batches.size());
    const std::size_t end = std::min(start + batch_size, perm.size());
    b.global_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                        perm.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(std::move(b));
  }
  return batches;
}

TraversalPlan generate_traversal_plan(std::span<const VirtualBatch> batches,
                                      const GlobalIndexMap& map) {
  TraversalPlan plan;
  plan.batches.reserve(batches.size());
  for (const VirtualBatch& batch : batches) {
    BatchPlan bp;
    bp.batch_id = batch.batch_id;
    bp.batch_size = static_cast<std::uint32_t>(batch.global_ids.size());

    std::vector<std::uint32_t> visit_order;  // nodes by first occurrence
    std::vector<std::ptrdiff_t> step_of_node(map.reverse.size(), -1);
    for (std::uint32_t pos = 0; pos < batch.global_ids.size(); ++pos) {
      const auto [node, local] = map.locate(batch.global_ids[pos]);
      if (step_of_node[node] < 0) {
        step_of_node[node] = static_cast<std::ptrdiff_t>(bp.steps.size());
        TraversalStep step;
        step.node_id = node;
        step.batch_id = bp.batch_id;
        step.batch_size = bp.batch_size;
        bp.steps.push_back(std::move(step));
      }
      TraversalStep& step = bp.steps[static_cast<std::size_t>(step_of_node[node])];
      step.local_indices.push_back(local);
      step.positions.push_back(pos);
    }
    plan.batches.push_back(std::move(bp));
  }
  return plan;
}

}  // namespace tlearn
