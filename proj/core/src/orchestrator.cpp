// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "tlearn/errors.hpp"
#include "tlearn/log.hpp"

namespace tlearn {

namespace {

Message make_request(MessageKind kind, std::uint32_t node, std::vector<std::uint8_t> payload) {
  Message m;
  m.kind = kind;
  m.source = kOrchestratorId;
  m.destination = node;
  m.payload = std::move(payload);
  return m;
}

void broadcast_model(Transport& transport, const MLPModel& model,
                     std::span<const std::uint32_t> node_ids) {
  const auto bytes = serialize_model(model);
  for (std::uint32_t node : node_ids) {
    transport.post(make_request(MessageKind::ModelBroadcast, node, bytes));
  }
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    const Message ack = transport.collect();
    if (ack.kind != MessageKind::Ack) {
      throw TransportError("expected Ack for model broadcast, got kind " +
                           std::to_string(static_cast<int>(ack.kind)));
    }
  }
}

std::vector<IndexRangeReport> query_index_ranges(Transport& transport,
                                                 std::span<const std::uint32_t> node_ids) {
  std::vector<IndexRangeReport> reports;
  reports.reserve(node_ids.size());
  for (std::uint32_t node : node_ids) {
    transport.post(make_request(MessageKind::IndexRangeMsg, node, {}));
    const Message reply = transport.collect();
    if (reply.kind != MessageKind::IndexRangeMsg) {
      throw TransportError("expected an index range reply");
    }
    const IndexRangeReport r = decode_index_range_payload(reply.payload);
    if (r.node_id != node) throw TransportError("index range reply from the wrong node");
    if (r.sample_count == 0) {
      throw ConfigError("node " + std::to_string(node) + " reports zero samples");
    }
    reports.push_back(r);
  }
  return reports;
}

/// Dispatches a batch's steps and returns its reports in plan-step order.
/// Deterministic mode runs one request at a time; pipelined mode posts every
/// step first and buffers replies as they arrive.
std::vector<NodeReport> run_batch_steps(Transport& transport, const BatchPlan& bp, LossKind loss,
                                        SyncMode mode) {
  std::vector<NodeReport> reports(bp.steps.size());
  auto place = [&](NodeReport&& report) {
    for (std::size_t s = 0; s < bp.steps.size(); ++s) {
      if (bp.steps[s].node_id == report.node_id) {
        if (report.batch_id != bp.batch_id) {
          throw IntegrityError("report for batch " + std::to_string(report.batch_id) +
                               " while running batch " + std::to_string(bp.batch_id));
        }
        reports[s] = std::move(report);
        return;
      }
    }
    throw IntegrityError("report from node " + std::to_string(report.node_id) +
                         " which has no step in batch " + std::to_string(bp.batch_id));
  };

  if (mode == SyncMode::deterministic) {
    for (const TraversalStep& step : bp.steps) {
      transport.post(make_request(MessageKind::StepAssignment, step.node_id,
                                  encode_step_payload(step, loss)));
      Message reply = transport.collect();
      if (reply.kind != MessageKind::NodeReportMsg) throw TransportError("expected a node report");
      place(deserialize_report(reply.payload));
    }
  } else {
    for (const TraversalStep& step : bp.steps) {
      transport.post(make_request(MessageKind::StepAssignment, step.node_id,
                                  encode_step_payload(step, loss)));
    }
    for (std::size_t i = 0; i < bp.steps.size(); ++i) {
      Message reply = transport.collect();
      if (reply.kind != MessageKind::NodeReportMsg) throw TransportError("expected a node report");
      place(deserialize_report(reply.payload));
    }
  }
  return reports;
}

}  // namespace

AggregationMode aggregation_from_name(const std::string& name) {
  if (name == "per-sample") return AggregationMode::per_sample;
  if (name == "eq6-mean") return AggregationMode::eq6_mean;
  throw ValidationError("unknown aggregation mode \"" + name + "\"");
}

std::string aggregation_name(AggregationMode m) {
  return m == AggregationMode::per_sample ? "per-sample" : "eq6-mean";
}

SyncMode sync_mode_from_name(const std::string& name) {
  if (name == "deterministic") return SyncMode::deterministic;
  if (name == "pipelined") return SyncMode::pipelined;
  throw ValidationError("unknown mode \"" + name + "\"");
}

std::string sync_mode_name(SyncMode m) {
  return m == SyncMode::deterministic ? "deterministic" : "pipelined";
}

AssembledBatch assemble_batch(std::span<const NodeReport> reports, AggregationMode mode) {
  if (reports.empty()) throw IntegrityError("no reports to assemble");

  // Fixed ascending-node-id order makes sums independent of arrival order.
  std::vector<const NodeReport*> ordered;
  ordered.reserve(reports.size());
  for (const NodeReport& r : reports) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const NodeReport* a, const NodeReport* b) { return a->node_id < b->node_id; });

  std::size_t total = 0;
  for (const NodeReport* r : ordered) {
    if (r->batch_id != ordered.front()->batch_id) {
      throw IntegrityError("reports mix batches " + std::to_string(ordered.front()->batch_id) +
                           " and " + std::to_string(r->batch_id));
    }
    if (r->positions.size() != r->sample_count ||
        r->first_layer_activations.rows != r->sample_count ||
        r->first_layer_grads.rows != r->sample_count ||
        r->last_layer_delta.rows != r->sample_count) {
      throw IntegrityError("report row counts disagree for node " + std::to_string(r->node_id));
    }
    total += r->sample_count;
  }

  const NodeReport& first = *ordered.front();
  AssembledBatch out;
  out.batch_id = first.batch_id;
  out.batch_size = static_cast<std::uint32_t>(total);
  out.first_layer_activations = Matrix(total, first.first_layer_activations.cols);
  out.node_first_layer_grads = Matrix(total, first.first_layer_grads.cols);
  out.last_layer_delta = Matrix(total, first.last_layer_delta.cols);
  out.layer1_weight_grad =
      Matrix(first.layer1_weight_grad.rows, first.layer1_weight_grad.cols);
  out.layer1_bias_grad.assign(first.layer1_bias_grad.size(), 0.0);
  out.position_to_node.assign(total, 0);

  std::vector<bool> filled(total, false);
  const double node_count = static_cast<double>(ordered.size());
  for (const NodeReport* r : ordered) {
    // Eq. 6 weighting: node-mean rows averaged with weight 1/n, realized as a
    // per-row factor B / (n * n_i). The default mode leaves rows untouched so
    // concatenation stays bit-exact against the CL oracle.
    const bool rescale = mode == AggregationMode::eq6_mean;
    const double factor =
        rescale ? static_cast<double>(total) / (node_count * r->sample_count) : 1.0;
    for (std::size_t i = 0; i < r->sample_count; ++i) {
      const std::uint32_t pos = r->positions[i];
      if (pos >= total) {
        throw IntegrityError("position " + std::to_string(pos) + " outside batch of " +
                             std::to_string(total));
      }
      if (filled[pos]) throw IntegrityError("position " + std::to_string(pos) + " filled twice");
      filled[pos] = true;
      out.position_to_node[pos] = r->node_id;
      for (std::size_t j = 0; j < out.first_layer_activations.cols; ++j) {
        out.first_layer_activations(pos, j) = r->first_layer_activations(i, j);
      }
      for (std::size_t j = 0; j < out.node_first_layer_grads.cols; ++j) {
        const double v = r->first_layer_grads(i, j);
        out.node_first_layer_grads(pos, j) = rescale ? v * factor : v;
      }
      for (std::size_t j = 0; j < out.last_layer_delta.cols; ++j) {
        const double v = r->last_layer_delta(i, j);
        out.last_layer_delta(pos, j) = rescale ? v * factor : v;
      }
    }
    if (r->layer1_weight_grad.rows != out.layer1_weight_grad.rows ||
        r->layer1_weight_grad.cols != out.layer1_weight_grad.cols ||
        r->layer1_bias_grad.size() != out.layer1_bias_grad.size()) {
      throw IntegrityError("layer-1 gradient shapes differ across nodes");
    }
    for (std::size_t i = 0; i < out.layer1_weight_grad.size(); ++i) {
      const double v = r->layer1_weight_grad.data[i];
      out.layer1_weight_grad.data[i] += rescale ? v * factor : v;
    }
    for (std::size_t i = 0; i < out.layer1_bias_grad.size(); ++i) {
      const double v = r->layer1_bias_grad[i];
      out.layer1_bias_grad[i] += rescale ? v * factor : v;
    }
    out.loss += r->local_loss;
  }

  std::string gaps;
  for (std::size_t p = 0; p < total; ++p) {
    if (!filled[p]) gaps += (gaps.empty() ? "" : ", ") + std::to_string(p);
  }
  if (!gaps.empty()) throw IntegrityError("unfilled batch positions: " + gaps);
  return out;
}

ForwardTrace recalc_activations(const MLPModel& model, const AssembledBatch& assembled) {
  return forward_tail(model, assembled.first_layer_activations);
}

GradientSet central_backward(const MLPModel& model, const ForwardTrace& trace,
                             const AssembledBatch& assembled) {
  GradientSet grads = backward_from_layer2(model, trace, assembled.last_layer_delta);
  const DenseLayer& first = model.layers.front();
  if (assembled.layer1_weight_grad.rows != first.out_dim() ||
      assembled.layer1_weight_grad.cols != first.in_dim() ||
      assembled.layer1_bias_grad.size() != first.out_dim()) {
    throw DimensionError("node layer-1 gradients do not mirror the model's first layer");
  }
  grads.weight_grads.front() = assembled.layer1_weight_grad;
  grads.bias_grads.front() = assembled.layer1_bias_grad;
  return grads;
}

ConsistencyReport consistency_check(const Matrix& node_first_layer_grads,
                                    const Matrix& recomputed_first_layer_grad, double tolerance) {
  if (tolerance < 0.0) throw ValidationError("tolerance must be non-negative");
  ConsistencyReport report;
  report.max_abs_diff = max_abs_diff(node_first_layer_grads, recomputed_first_layer_grad);
  report.pass = report.max_abs_diff <= tolerance;
  return report;
}

ConsistencyReport consistency_check(const AssembledBatch& assembled,
                                    const Matrix& recomputed_first_layer_grad, double tolerance) {
  ConsistencyReport report =
      consistency_check(assembled.node_first_layer_grads, recomputed_first_layer_grad, tolerance);
  if (!report.pass) {
    std::vector<std::pair<std::uint32_t, double>> by_node;
    for (std::size_t pos = 0; pos < assembled.position_to_node.size(); ++pos) {
      double row_max = 0.0;
      for (std::size_t j = 0; j < assembled.node_first_layer_grads.cols; ++j) {
        row_max = std::max(row_max, std::abs(assembled.node_first_layer_grads(pos, j) -
                                             recomputed_first_layer_grad(pos, j)));
      }
      const std::uint32_t node = assembled.position_to_node[pos];
      auto it = std::find_if(by_node.begin(), by_node.end(),
                             [node](const auto& p) { return p.first == node; });
      if (it == by_node.end()) {
        by_node.emplace_back(node, row_max);
      } else {
        it->second = std::max(it->second, row_max);
      }
    }
    std::sort(by_node.begin(), by_node.end());
    report.per_node = std::move(by_node);
  }
  return report;
}

TrainResult train_tl(Transport& transport, std::span<const LayerSpec> layer_spec,
                     const TrainConfig& config, const BatchHook& hook) {
  if (config.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (config.consistency_tolerance < 0.0) throw ConfigError("tolerance must be non-negative");

  const std::vector<std::uint32_t> node_ids = transport.node_ids();
  if (node_ids.empty()) throw ConfigError("no nodes");

  TrainResult result;
  result.model = init_model(layer_spec, config.seed);
  broadcast_model(transport, result.model, node_ids);

  const auto range_reports = query_index_ranges(transport, node_ids);
  const GlobalIndexMap map =
      build_global_index(range_reports, config.randomize_global_ids, config.seed);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = shuffle_into_batches(map, config.batch_size, config.seed + epoch);
    const TraversalPlan plan = generate_traversal_plan(batches, map);

    for (const BatchPlan& bp : plan.batches) {
      const auto start = std::chrono::steady_clock::now();
      const auto reports = run_batch_steps(transport, bp, config.loss, config.mode);

      const AssembledBatch assembled = assemble_batch(reports, config.aggregation);
      const ForwardTrace trace = recalc_activations(result.model, assembled);
      const GradientSet grads = central_backward(result.model, trace, assembled);
      const ConsistencyReport consistency =
          consistency_check(assembled, grads.input_grad, config.consistency_tolerance);
      if (!consistency.pass) {
        std::string detail;
        for (const auto& [node, diff] : consistency.per_node) {
          detail += " node " + std::to_string(node) + ": " + std::to_string(diff);
        }
        if (config.abort_on_consistency_failure) {
          throw IntegrityError("consistency check failed at epoch " + std::to_string(epoch) +
                               " batch " + std::to_string(bp.batch_id) + ":" + detail);
        }
        log(LogLevel::warn, "consistency check failed at epoch %zu batch %u (max diff %.3e):%s",
            epoch, bp.batch_id, consistency.max_abs_diff, detail.c_str());
      }

      result.model = sgd_step(std::move(result.model), grads, config.learning_rate);
      broadcast_model(transport, result.model, node_ids);

      BatchStats stats;
      stats.epoch = epoch;
      stats.batch_id = bp.batch_id;
      stats.loss = assembled.loss;
      stats.consistency_max_diff = consistency.max_abs_diff;
      stats.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      result.metrics.push_back(stats);
      if (hook) hook(stats, assembled, grads);
    }

    if (!config.checkpoint_dir.empty()) {
      std::filesystem::create_directories(config.checkpoint_dir);
      const auto path =
          std::filesystem::path(config.checkpoint_dir) / ("epoch_" + std::to_string(epoch) + ".tlmd");
      std::ofstream out(path, std::ios::binary);
      const auto bytes = serialize_model(result.model);
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    }
  }
  return result;
}

}  // namespace tlearn
