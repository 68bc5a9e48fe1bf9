// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tlearn/baselines.hpp"
#include "tlearn/cost_model.hpp"
#include "tlearn/data.hpp"
#include "tlearn/method.hpp"
#include "tlearn/orchestrator.hpp"

namespace tlearn {

struct DatasetSpec {
  std::string source = "synthetic";  // synthetic | idx | csv
  std::size_t samples = 256;
  std::size_t features = 8;
  std::size_t classes = 2;
  double spread = 0.8;
  std::string images_path;
  std::string labels_path;
  std::string csv_path;
  std::string label_column;
  bool standardize = true;
  double test_fraction = 0.25;
  std::uint64_t split_seed = 1000;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  PartitionSpec partition;
  std::vector<LayerSpec> layers;
  Method method = Method::cl;
  LossKind loss = LossKind::cross_entropy;
  double learning_rate = 0.1;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  SyncMode mode = SyncMode::deterministic;
  AggregationMode aggregation = AggregationMode::per_sample;
  std::size_t split_layer = 1;
  std::size_t local_epochs = 1;
  std::string out_path;
  std::string checkpoint_dir;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

ExperimentConfig config_from_json_string(const std::string& text);
ExperimentConfig config_from_json_file(const std::string& path);

/// Loads or generates the dataset a spec describes (seed feeds synthetic
/// generation only).
Dataset load_dataset_from_spec(const DatasetSpec& spec, std::uint64_t seed);

struct RunOutput {
  MLPModel model;
  std::uint64_t param_hash = 0;
  std::map<std::string, double> metrics;       // accuracy, macro_f1, auc (binary)
  std::vector<std::uint32_t> test_predictions;
  std::vector<std::string> metric_lines;       // JSON lines; last one is the summary
};

/// Trains with the configured method and evaluates on the held-out split.
/// The training set is always partitioned per the partition spec; CL trains
/// on the shards concatenated in global-index order, so runs with matching
/// partition specs see identical sample orderings across methods.
RunOutput run_experiment(const ExperimentConfig& config);

/// Writes metric_lines to config.out_path (or stdout when empty).
void emit_metrics(const ExperimentConfig& config, const RunOutput& output);

struct CompareSeedRow {
  std::uint64_t seed = 0;
  double param_distance = 0.0;
  double prediction_agreement = 0.0;
  std::map<std::string, double> metrics_a;
  std::map<std::string, double> metrics_b;
};

struct MetricDelta {
  double mean = 0.0;
  double stdev = 0.0;
};

struct CompareReport {
  std::vector<CompareSeedRow> rows;
  double max_param_distance = 0.0;
  double min_prediction_agreement = 1.0;
  std::map<std::string, MetricDelta> metric_deltas;  // metric -> (a - b) stats

  std::string to_json() const;
};

/// Runs both configs across seed offsets 0..n_seeds-1 (offsetting the run,
/// split, and partition seeds together) and reports per-seed parameter
/// distance, prediction agreement, and metric deltas.
CompareReport compare_experiments(const ExperimentConfig& a, const ExperimentConfig& b,
                                  std::size_t n_seeds);

/// JSON lines for the `plan` subcommand: one record per (batch, step).
std::vector<std::string> plan_records(std::span<const std::uint32_t> node_sample_counts,
                                      std::size_t batch_size, std::uint64_t seed);

CostParams cost_params_from_json_file(const std::string& path);

/// JSON lines for the `cost-model` subcommand, one per distributed method.
std::vector<std::string> cost_model_records(const CostParams& params);

}  // namespace tlearn
