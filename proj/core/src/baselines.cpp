// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/baselines.hpp"

#include <string>

#include "tlearn/errors.hpp"
#include "tlearn/virtual_batch.hpp"

namespace tlearn {

namespace {

/// Seeded batch cuts over n rows, identical to the virtual-batch shuffle on
/// sequential global ids.
std::vector<VirtualBatch> local_batches(std::size_t n, std::size_t batch_size,
                                        std::uint64_t seed) {
  const std::uint32_t counts[] = {static_cast<std::uint32_t>(n)};
  const auto reports = collect_index_ranges(counts);
  const GlobalIndexMap map = build_global_index(reports, false, 0);
  return shuffle_into_batches(map, batch_size, seed);
}

struct BatchView {
  Matrix rows;
  Matrix targets;
};

BatchView take_batch(const Dataset& d, const std::vector<std::uint32_t>& ids) {
  BatchView view;
  view.rows = gather_rows(d.features, ids);
  std::vector<std::uint32_t> labels;
  labels.reserve(ids.size());
  for (std::uint32_t id : ids) labels.push_back(d.labels[id]);
  view.targets = one_hot(labels, d.class_count);
  return view;
}

void validate_common(const BaselineConfig& config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (config.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (config.local_epochs == 0) throw ConfigError("local_epochs must be at least 1");
}

void validate_shards(std::span<const NodeShard> shards) {
  if (shards.empty()) throw ConfigError("no client shards");
  for (const NodeShard& s : shards) {
    if (s.size() == 0) throw ConfigError("client " + std::to_string(s.node_id) + " is empty");
  }
}

/// One SL-style batch update on a (client part, server part) pair. Labels are
/// shared with the server, matching the vanilla protocol. Returns the loss.
double sl_batch_step(MLPModel& client_part, MLPModel& server_part, const BatchView& view,
                     const BaselineConfig& config) {
  const ForwardTrace client_trace = forward_full(client_part, view.rows);
  const SlServerUpload upload{client_trace.activations.back(), view.targets};

  const ForwardTrace server_trace = forward_full(server_part, upload.smashed);
  const LossDelta ld = last_layer_loss_delta(server_part, server_trace, upload.targets,
                                             config.loss, view.rows.rows);
  auto [server_grads, cut_grad] = backward_with_cut_gradient(server_part, server_trace, ld.delta);

  // The returned cut gradient is dL/dX^(s); the client turns it into its own
  // last-layer delta and finishes BP locally.
  const GradientSet client_grads = backward_from_delta(
      client_part, client_trace, delta_through_activation(client_part, client_trace, cut_grad));

  server_part = sgd_step(std::move(server_part), server_grads, config.learning_rate);
  client_part = sgd_step(std::move(client_part), client_grads, config.learning_rate);
  return ld.loss;
}

}  // namespace

MLPModel slice_model(const MLPModel& model, std::size_t begin, std::size_t end) {
  if (begin >= end || end > model.layer_count()) {
    throw ValidationError("bad model slice [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ")");
  }
  MLPModel part;
  part.layers.assign(model.layers.begin() + static_cast<std::ptrdiff_t>(begin),
                     model.layers.begin() + static_cast<std::ptrdiff_t>(end));
  return part;
}

MLPModel join_models(std::span<const MLPModel> parts) {
  MLPModel whole;
  for (const MLPModel& part : parts) {
    whole.layers.insert(whole.layers.end(), part.layers.begin(), part.layers.end());
  }
  whole.validate();
  return whole;
}

MLPModel average_models(std::span<const MLPModel> models, std::span<const double> weights) {
  if (models.empty() || models.size() != weights.size()) {
    throw ValidationError("need one weight per model");
  }
  MLPModel acc = models.front();
  double total = weights.front();
  for (std::size_t i = 1; i < models.size(); ++i) {
    const MLPModel& m = models[i];
    if (m.layer_count() != acc.layer_count()) throw DimensionError("layer counts differ");
    total += weights[i];
    const double f = weights[i] / total;
    for (std::size_t l = 0; l < acc.layer_count(); ++l) {
      DenseLayer& a = acc.layers[l];
      const DenseLayer& b = m.layers[l];
      if (a.weights.rows != b.weights.rows || a.weights.cols != b.weights.cols) {
        throw DimensionError("layer " + std::to_string(l) + " shapes differ");
      }
      for (std::size_t k = 0; k < a.weights.size(); ++k) {
        a.weights.data[k] += f * (b.weights.data[k] - a.weights.data[k]);
      }
      for (std::size_t k = 0; k < a.biases.size(); ++k) {
        a.biases[k] += f * (b.biases[k] - a.biases[k]);
      }
    }
  }
  return acc;
}

BaselineResult train_cl(const Dataset& dataset, std::span<const LayerSpec> layer_spec,
                        const BaselineConfig& config, const ClBatchHook& hook) {
  validate_common(config);
  dataset.validate();

  BaselineResult result;
  result.model = init_model(layer_spec, config.seed);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = local_batches(dataset.size(), config.batch_size, config.seed + epoch);
    for (const VirtualBatch& batch : batches) {
      const BatchView view = take_batch(dataset, batch.global_ids);
      const ForwardTrace trace = forward_full(result.model, view.rows);
      const LossDelta ld = last_layer_loss_delta(result.model, trace, view.targets, config.loss,
                                                 view.rows.rows);
      const GradientSet grads = backward_from_delta(result.model, trace, ld.delta);

      BaselineBatchStats stats{epoch, batch.batch_id, ld.loss};
      result.metrics.push_back(stats);
      if (hook) hook(stats, grads);
      result.model = sgd_step(std::move(result.model), grads, config.learning_rate);
    }
  }
  return result;
}

BaselineResult train_fedavg(std::span<const NodeShard> shards,
                            std::span<const LayerSpec> layer_spec, const BaselineConfig& config) {
  validate_common(config);
  validate_shards(shards);

  BaselineResult result;
  result.model = init_model(layer_spec, config.seed);
  for (std::size_t round = 0; round < config.epochs; ++round) {
    std::vector<MLPModel> client_models;
    std::vector<double> weights;
    double round_loss = 0.0;
    double total_samples = 0.0;
    for (const NodeShard& shard : shards) {
      MLPModel local = result.model;
      double client_loss = 0.0;
      std::size_t client_batches = 0;
      for (std::size_t le = 0; le < config.local_epochs; ++le) {
        const std::uint64_t shuffle_seed = config.seed + round * config.local_epochs + le;
        const auto batches = local_batches(shard.size(), config.batch_size, shuffle_seed);
        for (const VirtualBatch& batch : batches) {
          const BatchView view = take_batch(shard.dataset, batch.global_ids);
          const ForwardTrace trace = forward_full(local, view.rows);
          const LossDelta ld =
              last_layer_loss_delta(local, trace, view.targets, config.loss, view.rows.rows);
          const GradientSet grads = backward_from_delta(local, trace, ld.delta);
          local = sgd_step(std::move(local), grads, config.learning_rate);
          client_loss += ld.loss;
          ++client_batches;
        }
      }
      round_loss += static_cast<double>(shard.size()) * client_loss /
                    static_cast<double>(client_batches);
      total_samples += static_cast<double>(shard.size());
      client_models.push_back(std::move(local));
      weights.push_back(static_cast<double>(shard.size()));
    }
    result.model = average_models(client_models, weights);
    result.metrics.push_back({round, 0, round_loss / total_samples});
  }
  return result;
}

BaselineResult train_sl(std::span<const NodeShard> shards, std::span<const LayerSpec> layer_spec,
                        const BaselineConfig& config) {
  validate_common(config);
  validate_shards(shards);
  if (layer_spec.size() < 2) throw ConfigError("split learning needs at least 2 layers");
  if (config.split_layer < 1 || config.split_layer >= layer_spec.size()) {
    throw ConfigError("split_layer must satisfy 1 <= s < L");
  }

  const MLPModel full = init_model(layer_spec, config.seed);
  MLPModel client_part = slice_model(full, 0, config.split_layer);  // passes between clients
  MLPModel server_part = slice_model(full, config.split_layer, full.layer_count());

  BaselineResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::uint32_t batch_counter = 0;
    for (const NodeShard& shard : shards) {
      const auto batches = local_batches(shard.size(), config.batch_size, config.seed + epoch);
      for (const VirtualBatch& batch : batches) {
        const BatchView view = take_batch(shard.dataset, batch.global_ids);
        const double loss = sl_batch_step(client_part, server_part, view, config);
        result.metrics.push_back({epoch, batch_counter++, loss});
      }
    }
  }
  const MLPModel parts[] = {client_part, server_part};
  result.model = join_models(parts);
  return result;
}

BaselineResult train_sl_plus(std::span<const NodeShard> shards,
                             std::span<const LayerSpec> layer_spec, const BaselineConfig& config) {
  validate_common(config);
  validate_shards(shards);
  if (layer_spec.size() < 3) throw ConfigError("sl_plus needs at least 3 layers");
  const std::size_t s = config.split_layer;
  if (s < 1 || s + 1 >= layer_spec.size()) {
    throw ConfigError("split_layer must leave a non-empty middle portion");
  }

  const MLPModel full = init_model(layer_spec, config.seed);
  MLPModel head = slice_model(full, 0, s);
  MLPModel middle = slice_model(full, s, full.layer_count() - 1);
  MLPModel tail = slice_model(full, full.layer_count() - 1, full.layer_count());

  BaselineResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::uint32_t batch_counter = 0;
    for (const NodeShard& shard : shards) {
      const auto batches = local_batches(shard.size(), config.batch_size, config.seed + epoch);
      for (const VirtualBatch& batch : batches) {
        const BatchView view = take_batch(shard.dataset, batch.global_ids);

        const ForwardTrace head_trace = forward_full(head, view.rows);
        const SlPlusServerUpload up{head_trace.activations.back()};
        const ForwardTrace middle_trace = forward_full(middle, up.smashed);
        const ForwardTrace tail_trace = forward_full(tail, middle_trace.activations.back());

        // Loss and the last-layer delta stay on the client; labels never move.
        const LossDelta ld =
            last_layer_loss_delta(tail, tail_trace, view.targets, config.loss, view.rows.rows);
        auto [tail_grads, cut2] = backward_with_cut_gradient(tail, tail_trace, ld.delta);
        auto [middle_grads, cut1] = backward_with_cut_gradient(
            middle, middle_trace, delta_through_activation(middle, middle_trace, cut2));
        const GradientSet head_grads = backward_from_delta(
            head, head_trace, delta_through_activation(head, head_trace, cut1));

        tail = sgd_step(std::move(tail), tail_grads, config.learning_rate);
        middle = sgd_step(std::move(middle), middle_grads, config.learning_rate);
        head = sgd_step(std::move(head), head_grads, config.learning_rate);
        result.metrics.push_back({epoch, batch_counter++, ld.loss});
      }
    }
  }
  const MLPModel parts[] = {head, middle, tail};
  result.model = join_models(parts);
  return result;
}

BaselineResult train_sfl(std::span<const NodeShard> shards, std::span<const LayerSpec> layer_spec,
                         const BaselineConfig& config) {
  validate_common(config);
  validate_shards(shards);
  if (layer_spec.size() < 2) throw ConfigError("sfl needs at least 2 layers");
  if (config.split_layer < 1 || config.split_layer >= layer_spec.size()) {
    throw ConfigError("split_layer must satisfy 1 <= s < L");
  }

  const MLPModel full = init_model(layer_spec, config.seed);
  MLPModel global_client = slice_model(full, 0, config.split_layer);
  MLPModel global_server = slice_model(full, config.split_layer, full.layer_count());

  BaselineResult result;
  for (std::size_t round = 0; round < config.epochs; ++round) {
    std::vector<MLPModel> client_parts;
    std::vector<MLPModel> server_parts;  // per-client replicas
    std::vector<double> weights;
    double round_loss = 0.0;
    double total_samples = 0.0;
    for (const NodeShard& shard : shards) {
      MLPModel local_client = global_client;
      MLPModel local_server = global_server;
      double client_loss = 0.0;
      std::size_t client_batches = 0;
      for (std::size_t le = 0; le < config.local_epochs; ++le) {
        const std::uint64_t shuffle_seed = config.seed + round * config.local_epochs + le;
        const auto batches = local_batches(shard.size(), config.batch_size, shuffle_seed);
        for (const VirtualBatch& batch : batches) {
          const BatchView view = take_batch(shard.dataset, batch.global_ids);
          client_loss += sl_batch_step(local_client, local_server, view, config);
          ++client_batches;
        }
      }
      round_loss += static_cast<double>(shard.size()) * client_loss /
                    static_cast<double>(client_batches);
      total_samples += static_cast<double>(shard.size());
      client_parts.push_back(std::move(local_client));
      server_parts.push_back(std::move(local_server));
      weights.push_back(static_cast<double>(shard.size()));
    }
    global_client = average_models(client_parts, weights);
    global_server = average_models(server_parts, weights);
    result.metrics.push_back({round, 0, round_loss / total_samples});
  }
  const MLPModel parts[] = {global_client, global_server};
  result.model = join_models(parts);
  return result;
}

}  // namespace tlearn
