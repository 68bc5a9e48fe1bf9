// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tlearn/data.hpp"
#include "tlearn/method.hpp"
#include "tlearn/nn.hpp"

namespace tlearn {

// Reference trainers sharing nn-core with the traversal path, so method
// comparisons isolate the learning protocol.

struct BaselineConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 1;  // rounds for fedavg/sfl
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::cross_entropy;
  std::size_t split_layer = 1;  // s: clients hold layers 1..s
  std::size_t local_epochs = 1; // E, fedavg/sfl
};

struct BaselineBatchStats {
  std::size_t epoch = 0;
  std::uint32_t batch_id = 0;
  double loss = 0.0;
};

struct BaselineResult {
  MLPModel model;
  std::vector<BaselineBatchStats> metrics;
};

/// Per-batch observer for the CL oracle, handed the gradients actually
/// applied. TL-equivalence tests compare against these.
using ClBatchHook = std::function<void(const BaselineBatchStats&, const GradientSet&)>;

/// Centralized learning: seeded init, per-epoch shuffle with seed = base +
/// epoch (the same Fisher-Yates stream the virtual-batch module uses applied
/// to sequential ids), batch-mean loss, one SGD step per batch.
BaselineResult train_cl(const Dataset& dataset, std::span<const LayerSpec> layer_spec,
                        const BaselineConfig& config, const ClBatchHook& hook = {});

/// FedAvg: per round, each client trains local_epochs epochs from the
/// broadcast global model; the new global model is the sample-count-weighted
/// average of client parameters.
BaselineResult train_fedavg(std::span<const NodeShard> shards,
                            std::span<const LayerSpec> layer_spec, const BaselineConfig& config);

/// Vanilla split learning: clients hold layers 1..s, the server the rest,
/// labels travel to the server, clients run sequentially and hand their
/// weights to the next client.
BaselineResult train_sl(std::span<const NodeShard> shards, std::span<const LayerSpec> layer_spec,
                        const BaselineConfig& config);

/// Split learning without label sharing: the first portion and the final
/// layer stay on the client, only the middle goes to the server. Needs L >= 3.
BaselineResult train_sl_plus(std::span<const NodeShard> shards,
                             std::span<const LayerSpec> layer_spec, const BaselineConfig& config);

/// SplitFed: SL-style steps against per-client server replicas, then FedAvg
/// aggregation of both the client parts and the server parts each round.
BaselineResult train_sfl(std::span<const NodeShard> shards, std::span<const LayerSpec> layer_spec,
                         const BaselineConfig& config);

/// Sample-count-weighted parameter average in ascending input order, computed
/// as an incremental mean so averaging identical models is bit-exact.
MLPModel average_models(std::span<const MLPModel> models, std::span<const double> weights);

// What crosses the client/server boundary per batch. Vanilla SL shares the
// label rows; SL+ has no label field at all, which the information-flow
// audits assert at the type level.
struct SlServerUpload {
  Matrix smashed;
  Matrix targets;
};

struct SlPlusServerUpload {
  Matrix smashed;
};

MLPModel slice_model(const MLPModel& model, std::size_t begin, std::size_t end);
MLPModel join_models(std::span<const MLPModel> parts);

}  // namespace tlearn
