// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/node.hpp"

#include <string>

#include "tlearn/errors.hpp"

namespace tlearn {

NodeReport node_forward_report(const NodeState& state, const TraversalStep& step, LossKind loss) {
  if (step.node_id != state.node_id()) {
    throw IntegrityError("step for node " + std::to_string(step.node_id) + " sent to node " +
                         std::to_string(state.node_id()));
  }
  if (step.local_indices.empty() || step.local_indices.size() != step.positions.size()) {
    throw IntegrityError("step local indices and positions disagree");
  }
  if (step.batch_size < step.local_indices.size()) {
    throw IntegrityError("step is larger than its batch");
  }
  const Dataset& data = state.shard.dataset;
  for (std::uint32_t local : step.local_indices) {
    if (local >= data.size()) {
      throw IntegrityError("local index " + std::to_string(local) + " out of range " +
                           std::to_string(data.size()));
    }
  }
  if (state.model.input_dim() != data.features.cols) {
    throw DimensionError("model expects " + std::to_string(state.model.input_dim()) +
                         " features, shard has " + std::to_string(data.features.cols));
  }

  const Matrix slice = gather_rows(data.features, step.local_indices);
  std::vector<std::uint32_t> slice_labels;
  slice_labels.reserve(step.local_indices.size());
  for (std::uint32_t local : step.local_indices) slice_labels.push_back(data.labels[local]);
  const Matrix targets = one_hot(slice_labels, data.class_count);

  const ForwardTrace trace = forward_full(state.model, slice);
  const LossDelta ld = last_layer_loss_delta(state.model, trace, targets, loss, step.batch_size);
  GradientSet grads = backward_from_delta(state.model, trace, ld.delta);

  NodeReport report;
  report.node_id = state.node_id();
  report.batch_id = step.batch_id;
  report.sample_count = static_cast<std::uint32_t>(step.local_indices.size());
  report.positions = step.positions;
  report.first_layer_activations = trace.activations.front();
  report.first_layer_grads = std::move(grads.input_grad);
  report.last_layer_delta = ld.delta;
  report.local_loss = ld.loss;
  report.layer1_weight_grad = std::move(grads.weight_grads.front());
  report.layer1_bias_grad = std::move(grads.bias_grads.front());
  // Gradients of layers 2..L-1 are dropped here; the orchestrator recomputes
  // them from the recalculated activations.
  return report;
}

IndexRangeReport make_index_range_report(const NodeState& state) {
  if (state.shard.size() == 0) {
    throw ConfigError("node " + std::to_string(state.node_id()) + " has zero samples");
  }
  return {state.node_id(), static_cast<std::uint32_t>(state.shard.size())};
}

std::vector<std::uint8_t> serialize_report(const NodeReport& report) {
  ByteWriter w;
  w.magic("TLNR");
  w.u32(report.node_id);
  w.u32(report.batch_id);
  w.u32(report.sample_count);
  for (std::uint32_t p : report.positions) w.u32(p);
  write_matrix(w, report.first_layer_activations);
  write_matrix(w, report.first_layer_grads);
  write_matrix(w, report.last_layer_delta);
  w.f64(report.local_loss);
  write_matrix(w, report.layer1_weight_grad);
  w.u32(static_cast<std::uint32_t>(report.layer1_bias_grad.size()));
  for (double v : report.layer1_bias_grad) w.f64(v);
  return w.take();
}

NodeReport deserialize_report(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("TLNR");
  NodeReport report;
  report.node_id = r.u32();
  report.batch_id = r.u32();
  report.sample_count = r.u32();
  if (static_cast<std::uint64_t>(report.sample_count) * 4 > r.remaining()) {
    throw FormatError("truncated report positions");
  }
  report.positions.resize(report.sample_count);
  for (auto& p : report.positions) p = r.u32();
  report.first_layer_activations = read_matrix(r);
  report.first_layer_grads = read_matrix(r);
  report.last_layer_delta = read_matrix(r);
  report.local_loss = r.f64();
  report.layer1_weight_grad = read_matrix(r);
  const std::uint32_t bias_len = r.u32();
  if (static_cast<std::uint64_t>(bias_len) * 8 > r.remaining()) {
    throw FormatError("truncated report bias gradient");
  }
  report.layer1_bias_grad.resize(bias_len);
  for (auto& v : report.layer1_bias_grad) v = r.f64();
  r.expect_done();

  if (report.first_layer_activations.rows != report.sample_count ||
      report.first_layer_grads.rows != report.sample_count ||
      report.last_layer_delta.rows != report.sample_count) {
    throw FormatError("report matrix rows do not match sample count");
  }
  return report;
}

}  // namespace tlearn
