// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tlearn/node.hpp"
#include "tlearn/transport.hpp"

namespace tlearn {

enum class AggregationMode : std::uint8_t {
  per_sample,  // concatenate per-sample rows by position (CL-exact)
  eq6_mean,    // unweighted node-mean aggregation
};

enum class SyncMode : std::uint8_t { deterministic, pipelined };

AggregationMode aggregation_from_name(const std::string& name);
std::string aggregation_name(AggregationMode m);
SyncMode sync_mode_from_name(const std::string& name);
std::string sync_mode_name(SyncMode m);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::cross_entropy;
  AggregationMode aggregation = AggregationMode::per_sample;
  SyncMode mode = SyncMode::deterministic;
  double consistency_tolerance = 1e-9;
  bool abort_on_consistency_failure = false;
  bool randomize_global_ids = false;
  std::string checkpoint_dir;
};

/// One virtual batch reassembled from node reports, rows placed by position.
struct AssembledBatch {
  std::uint32_t batch_id = 0;
  std::uint32_t batch_size = 0;
  Matrix first_layer_activations;
  Matrix last_layer_delta;
  Matrix node_first_layer_grads;
  Matrix layer1_weight_grad;            // summed over nodes, ascending node id
  std::vector<double> layer1_bias_grad;
  double loss = 0.0;
  std::vector<std::uint32_t> position_to_node;
};

AssembledBatch assemble_batch(std::span<const NodeReport> reports,
                              AggregationMode mode = AggregationMode::per_sample);

/// Recomputes layers 2..L from the assembled first-layer activations. The
/// trace holds the assembled matrix at index 0; layer 1 is never recomputed
/// because the orchestrator has no raw inputs.
ForwardTrace recalc_activations(const MLPModel& model, const AssembledBatch& assembled);

/// Central BP over layers L..2; first-layer parameter gradients come from the
/// node-shipped sums. The returned input_grad is the recomputed global
/// dL/dX^(1) used by the consistency check.
GradientSet central_backward(const MLPModel& model, const ForwardTrace& trace,
                             const AssembledBatch& assembled);

struct ConsistencyReport {
  double max_abs_diff = 0.0;
  bool pass = true;
  std::vector<std::pair<std::uint32_t, double>> per_node;  // node id -> max diff
};

ConsistencyReport consistency_check(const Matrix& node_first_layer_grads,
                                    const Matrix& recomputed_first_layer_grad, double tolerance);

/// Same check with per-node diffs resolved through the assembled positions.
ConsistencyReport consistency_check(const AssembledBatch& assembled,
                                    const Matrix& recomputed_first_layer_grad, double tolerance);

struct BatchStats {
  std::size_t epoch = 0;
  std::uint32_t batch_id = 0;
  double loss = 0.0;
  double consistency_max_diff = 0.0;
  double wall_ms = 0.0;
};

/// Observer for tests and metrics streaming; called once per trained batch.
using BatchHook =
    std::function<void(const BatchStats&, const AssembledBatch&, const GradientSet&)>;

struct TrainResult {
  MLPModel model;
  std::vector<BatchStats> metrics;
};

/// Algorithm 2: per epoch, rebuild batches (seed = base + epoch) and the
/// traversal plan; per batch, dispatch steps, collect reports, assemble,
/// recalculate activations, run central BP, check Eq. 12 consistency, apply
/// SGD, and redistribute the model to every node.
TrainResult train_tl(Transport& transport, std::span<const LayerSpec> layer_spec,
                     const TrainConfig& config, const BatchHook& hook = {});

}  // namespace tlearn
