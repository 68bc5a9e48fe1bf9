// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlearn/data.hpp"
#include "tlearn/nn.hpp"
#include "tlearn/virtual_batch.hpp"

namespace tlearn {

struct NodeState {
  NodeShard shard;
  MLPModel model;

  std::uint32_t node_id() const { return shard.node_id; }
};

// Everything a node transmits for one batch. Deliberately carries no raw
// features and no labels: activations are already through the first layer's
// transform, deltas and gradients are loss derivatives. The layer-1 parameter
// gradients (summed over the node's rows) ride along because the orchestrator
// has no raw inputs to compute them from.
struct NodeReport {
  std::uint32_t node_id = 0;
  std::uint32_t batch_id = 0;
  std::uint32_t sample_count = 0;
  std::vector<std::uint32_t> positions;
  Matrix first_layer_activations;  // X^(1), rows in step order
  Matrix first_layer_grads;        // dL/dX^(1) per sample
  Matrix last_layer_delta;         // dL/dZ^(L) per sample, full-batch denominator
  double local_loss = 0.0;
  Matrix layer1_weight_grad;       // summed over this node's rows
  std::vector<double> layer1_bias_grad;

  bool operator==(const NodeReport&) const = default;
};

/// Runs the node side of one traversal step: full local forward pass on the
/// slice, loss and last-layer delta with the full virtual-batch denominator,
/// and a local backward pass kept only for the first-layer outputs.
NodeReport node_forward_report(const NodeState& state, const TraversalStep& step, LossKind loss);

IndexRangeReport make_index_range_report(const NodeState& state);

// TLNR wire format: magic "TLNR", u32 node_id, u32 batch_id, u32
// sample_count, u32 positions[], the three matrices (u32 rows, u32 cols, f64
// LE row-major), f64 loss, then the layer-1 weight gradient matrix and u32
// length + f64 bias gradient.
std::vector<std::uint8_t> serialize_report(const NodeReport& report);
NodeReport deserialize_report(std::span<const std::uint8_t> bytes);

}  // namespace tlearn
