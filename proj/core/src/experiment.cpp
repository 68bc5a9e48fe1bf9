// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "tlearn/errors.hpp"
#include "tlearn/metrics.hpp"
#include "tlearn/transport.hpp"

namespace tlearn {

namespace {

using nlohmann::json;

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <typename T>
T field_or(const json& j, const std::string& key, T fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(ctx + key + ": wrong type");
  }
}

DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  d.source = field_or<std::string>(j, "source", d.source, "dataset.");
  d.samples = field_or<std::size_t>(j, "samples", d.samples, "dataset.");
  d.features = field_or<std::size_t>(j, "features", d.features, "dataset.");
  d.classes = field_or<std::size_t>(j, "classes", d.classes, "dataset.");
  d.spread = field_or<double>(j, "spread", d.spread, "dataset.");
  d.images_path = field_or<std::string>(j, "images", d.images_path, "dataset.");
  d.labels_path = field_or<std::string>(j, "labels", d.labels_path, "dataset.");
  d.csv_path = field_or<std::string>(j, "csv", d.csv_path, "dataset.");
  d.label_column = field_or<std::string>(j, "label_column", d.label_column, "dataset.");
  d.standardize = field_or<bool>(j, "standardize", d.standardize, "dataset.");
  d.test_fraction = field_or<double>(j, "test_fraction", d.test_fraction, "dataset.");
  d.split_seed = field_or<std::uint64_t>(j, "split_seed", d.split_seed, "dataset.");
  return d;
}

PartitionSpec partition_from_json(const json& j) {
  PartitionSpec p;
  const std::string strategy =
      field_or<std::string>(j, "strategy", "iid", "partition.");
  if (strategy == "iid") {
    p.strategy = PartitionStrategy::iid;
  } else if (strategy == "label_skew") {
    p.strategy = PartitionStrategy::label_skew;
  } else if (strategy == "kmeans") {
    p.strategy = PartitionStrategy::kmeans;
  } else {
    throw ConfigError("partition.strategy: unknown strategy \"" + strategy + "\"");
  }
  p.node_count = field_or<std::size_t>(j, "nodes", 1, "partition.");
  p.seed = field_or<std::uint64_t>(j, "seed", 42, "partition.");
  p.shards_per_node = field_or<std::size_t>(j, "shards_per_node", 1, "partition.");
  p.kmeans_k = field_or<std::size_t>(j, "kmeans_k", 0, "partition.");
  p.kmeans_max_iters = field_or<std::size_t>(j, "kmeans_max_iters", 100, "partition.");
  return p;
}

std::vector<LayerSpec> layers_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("model: must be a non-empty layer array");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& item = j.at(i);
    const std::string ctx = "model[" + std::to_string(i) + "]";
    if (!item.is_array() || item.size() != 3) {
      throw ConfigError(ctx + ": expected [in, out, activation]");
    }
    LayerSpec ls;
    try {
      ls.in_dim = item.at(0).get<std::size_t>();
      ls.out_dim = item.at(1).get<std::size_t>();
      ls.activation = activation_from_name(item.at(2).get<std::string>());
    } catch (const json::exception&) {
      throw ConfigError(ctx + ": expected [in, out, activation]");
    } catch (const ValidationError& e) {
      throw ConfigError(ctx + ": " + e.what());
    }
    layers.push_back(ls);
  }
  return layers;
}

json summary_metrics(const std::map<std::string, double>& metrics) {
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate: must be positive");
  if (batch_size == 0) throw ConfigError("batch_size: must be at least 1");
  if (layers.empty()) throw ConfigError("model: must have at least one layer");
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction: must be in (0, 1)");
  }
  if (partition.node_count == 0) throw ConfigError("partition.nodes: must be at least 1");
  if (local_epochs == 0) throw ConfigError("local_epochs: must be at least 1");
  if (dataset.source == "idx" &&
      (dataset.images_path.empty() || dataset.labels_path.empty())) {
    throw ConfigError("dataset.images: idx source needs images and labels paths");
  }
  if (dataset.source == "csv" && (dataset.csv_path.empty() || dataset.label_column.empty())) {
    throw ConfigError("dataset.csv: csv source needs a path and label_column");
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in_dim != layers[i - 1].out_dim) {
      throw ConfigError("model[" + std::to_string(i) + "]: dimension chain broken");
    }
  }
}

ExperimentConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
  if (j.contains("partition")) cfg.partition = partition_from_json(j.at("partition"));
  if (j.contains("model")) cfg.layers = layers_from_json(j.at("model"));
  try {
    if (j.contains("method")) cfg.method = method_from_name(j.at("method").get<std::string>());
    if (j.contains("loss")) cfg.loss = loss_from_name(j.at("loss").get<std::string>());
    if (j.contains("mode")) cfg.mode = sync_mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("aggregation")) {
      cfg.aggregation = aggregation_from_name(j.at("aggregation").get<std::string>());
    }
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  cfg.learning_rate = field_or<double>(j, "learning_rate", cfg.learning_rate, "");
  cfg.epochs = field_or<std::size_t>(j, "epochs", cfg.epochs, "");
  cfg.batch_size = field_or<std::size_t>(j, "batch_size", cfg.batch_size, "");
  cfg.seed = field_or<std::uint64_t>(j, "seed", cfg.seed, "");
  cfg.split_layer = field_or<std::size_t>(j, "split_layer", cfg.split_layer, "");
  cfg.local_epochs = field_or<std::size_t>(j, "local_epochs", cfg.local_epochs, "");
  cfg.out_path = field_or<std::string>(j, "out", cfg.out_path, "");
  cfg.checkpoint_dir = field_or<std::string>(j, "checkpoint_dir", cfg.checkpoint_dir, "");
  return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_string(ss.str());
}

Dataset load_dataset_from_spec(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.source == "synthetic") {
    return gen_synthetic(spec.samples, spec.features, spec.classes, spec.spread, seed);
  }
  if (spec.source == "idx") return load_idx(spec.images_path, spec.labels_path);
  if (spec.source == "csv") return load_csv(spec.csv_path, spec.label_column);
  throw ConfigError("dataset.source: unknown source \"" + spec.source + "\"");
}

RunOutput run_experiment(const ExperimentConfig& config) {
  config.validate();

  Dataset full = load_dataset_from_spec(config.dataset, config.seed);
  TrainTestSplit split = split_dataset(full, config.dataset.test_fraction,
                                       config.dataset.split_seed);
  if (config.dataset.standardize) {
    const Standardizer st = Standardizer::fit(split.train.features);
    st.apply(split.train.features);
    st.apply(split.test.features);
  }
  if (config.layers.front().in_dim != split.train.features.cols) {
    throw ConfigError("model[0]: input width " + std::to_string(config.layers.front().in_dim) +
                      " does not match " + std::to_string(split.train.features.cols) +
                      " features");
  }
  if (config.layers.back().out_dim != split.train.class_count) {
    throw ConfigError("model: output width " + std::to_string(config.layers.back().out_dim) +
                      " does not match " + std::to_string(split.train.class_count) + " classes");
  }

  const std::vector<NodeShard> shards = partition(split.train, config.partition);

  RunOutput out;
  std::vector<std::string>& lines = out.metric_lines;
  const std::string method = method_name(config.method);

  if (config.method == Method::tl) {
    InProcessTransport transport(shards, config.mode == SyncMode::pipelined);
    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.seed = config.seed;
    tc.loss = config.loss;
    tc.aggregation = config.aggregation;
    tc.mode = config.mode;
    tc.checkpoint_dir = config.checkpoint_dir;
    TrainResult result = train_tl(transport, config.layers, tc);
    for (const BatchStats& s : result.metrics) {
      json line = {{"method", method},          {"epoch", s.epoch},
                   {"batch", s.batch_id},       {"loss", s.loss},
                   {"consistency_max_diff", s.consistency_max_diff},
                   {"wall_ms", s.wall_ms}};
      lines.push_back(line.dump());
    }
    out.model = std::move(result.model);
  } else if (config.method == Method::cl) {
    // The CL oracle trains on the assembled dataset: shards concatenated in
    // global-index order, so batch cuts line up with a TL run that used the
    // same partition spec.
    BaselineConfig bc{config.learning_rate, config.epochs, config.batch_size,
                      config.seed,          config.loss,   config.split_layer,
                      config.local_epochs};
    BaselineResult result = train_cl(concat_shards(shards), config.layers, bc);
    for (const BaselineBatchStats& s : result.metrics) {
      json line = {{"method", method}, {"epoch", s.epoch}, {"batch", s.batch_id}, {"loss", s.loss}};
      lines.push_back(line.dump());
    }
    out.model = std::move(result.model);
  } else {
    BaselineConfig bc{config.learning_rate, config.epochs, config.batch_size,
                      config.seed,          config.loss,   config.split_layer,
                      config.local_epochs};
    BaselineResult result;
    switch (config.method) {
      case Method::fedavg: result = train_fedavg(shards, config.layers, bc); break;
      case Method::sl: result = train_sl(shards, config.layers, bc); break;
      case Method::sl_plus: result = train_sl_plus(shards, config.layers, bc); break;
      case Method::sfl: result = train_sfl(shards, config.layers, bc); break;
      default: throw ConfigError("method: unsupported method");
    }
    for (const BaselineBatchStats& s : result.metrics) {
      json line = {{"method", method}, {"epoch", s.epoch}, {"batch", s.batch_id}, {"loss", s.loss}};
      lines.push_back(line.dump());
    }
    out.model = std::move(result.model);
  }

  // Held-out evaluation.
  const ForwardTrace trace = forward_full(out.model, split.test.features);
  const Matrix& scores = trace.activations.back();
  out.test_predictions = argmax_rows(scores);
  out.metrics["accuracy"] = accuracy(out.test_predictions, split.test.labels);
  out.metrics["macro_f1"] =
      macro_f1(out.test_predictions, split.test.labels, split.test.class_count);
  if (split.test.class_count == 2) {
    bool has_both = false;
    for (std::size_t i = 1; i < split.test.labels.size() && !has_both; ++i) {
      has_both = split.test.labels[i] != split.test.labels[0];
    }
    if (has_both) {
      std::vector<double> positive_scores(scores.rows);
      for (std::size_t i = 0; i < scores.rows; ++i) positive_scores[i] = scores(i, 1);
      out.metrics["auc"] = auc(positive_scores, split.test.labels);
    }
  }

  out.param_hash = model_param_hash(out.model);
  json summary = {{"summary", true},
                  {"method", method},
                  {"seed", config.seed},
                  {"metrics", summary_metrics(out.metrics)},
                  {"param_hash", hash_hex(out.param_hash)}};
  lines.push_back(summary.dump());
  return out;
}

void emit_metrics(const ExperimentConfig& config, const RunOutput& output) {
  if (config.out_path.empty()) {
    for (const auto& line : output.metric_lines) std::cout << line << '\n';
    return;
  }
  std::ofstream out(config.out_path);
  if (!out) throw ConfigError("out: cannot write " + config.out_path);
  for (const auto& line : output.metric_lines) out << line << '\n';
}

CompareReport compare_experiments(const ExperimentConfig& a, const ExperimentConfig& b,
                                  std::size_t n_seeds) {
  if (n_seeds == 0) throw ConfigError("compare needs at least one seed");
  if (a.layers.size() != b.layers.size()) {
    throw ConfigError("compare: configs must share a layer_spec");
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].in_dim != b.layers[i].in_dim || a.layers[i].out_dim != b.layers[i].out_dim) {
      throw ConfigError("compare: configs must share a layer_spec");
    }
  }

  CompareReport report;
  std::map<std::string, std::vector<double>> deltas;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    ExperimentConfig ca = a;
    ExperimentConfig cb = b;
    for (ExperimentConfig* c : {&ca, &cb}) {
      c->seed += k;
      c->dataset.split_seed += k;
      c->partition.seed += k;
      c->out_path.clear();
      c->checkpoint_dir.clear();
    }
    const RunOutput ra = run_experiment(ca);
    const RunOutput rb = run_experiment(cb);
    if (ra.test_predictions.size() != rb.test_predictions.size()) {
      throw ConfigError("compare: runs produced different test sets");
    }

    CompareSeedRow row;
    row.seed = ca.seed;
    row.param_distance = model_max_abs_diff(ra.model, rb.model);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < ra.test_predictions.size(); ++i) {
      if (ra.test_predictions[i] == rb.test_predictions[i]) ++agree;
    }
    row.prediction_agreement =
        static_cast<double>(agree) / static_cast<double>(ra.test_predictions.size());
    row.metrics_a = ra.metrics;
    row.metrics_b = rb.metrics;

    report.max_param_distance = std::max(report.max_param_distance, row.param_distance);
    report.min_prediction_agreement =
        std::min(report.min_prediction_agreement, row.prediction_agreement);
    for (const auto& [key, va] : ra.metrics) {
      auto it = rb.metrics.find(key);
      if (it != rb.metrics.end()) deltas[key].push_back(va - it->second);
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& [key, values] : deltas) {
    MetricDelta d;
    for (double v : values) d.mean += v;
    d.mean /= static_cast<double>(values.size());
    for (double v : values) d.stdev += (v - d.mean) * (v - d.mean);
    d.stdev = values.size() > 1
                  ? std::sqrt(d.stdev / static_cast<double>(values.size() - 1))
                  : 0.0;
    report.metric_deltas[key] = d;
  }
  return report;
}

std::string CompareReport::to_json() const {
  json per_seed = json::array();
  for (const CompareSeedRow& row : rows) {
    per_seed.push_back({{"seed", row.seed},
                        {"param_distance", row.param_distance},
                        {"prediction_agreement", row.prediction_agreement},
                        {"metrics_a", summary_metrics(row.metrics_a)},
                        {"metrics_b", summary_metrics(row.metrics_b)}});
  }
  json delta = json::object();
  for (const auto& [key, d] : metric_deltas) {
    delta[key] = {{"mean", d.mean}, {"stdev", d.stdev}};
  }
  json j = {{"seeds", rows.size()},
            {"max_param_distance", max_param_distance},
            {"min_prediction_agreement", min_prediction_agreement},
            {"metric_deltas", delta},
            {"per_seed", per_seed}};
  return j.dump(2);
}

std::vector<std::string> plan_records(std::span<const std::uint32_t> node_sample_counts,
                                      std::size_t batch_size, std::uint64_t seed) {
  const auto reports = collect_index_ranges(node_sample_counts);
  const GlobalIndexMap map = build_global_index(reports, false, seed);
  const auto batches = shuffle_into_batches(map, batch_size, seed);
  const TraversalPlan plan = generate_traversal_plan(batches, map);

  std::vector<std::string> lines;
  for (const BatchPlan& bp : plan.batches) {
    for (const TraversalStep& step : bp.steps) {
      json line = {{"batch_id", bp.batch_id},
                   {"node_id", step.node_id},
                   {"local_indices", step.local_indices},
                   {"positions", step.positions}};
      lines.push_back(line.dump());
    }
  }
  return lines;
}

CostParams cost_params_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cost params file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cost params are not valid JSON: ") + e.what());
  }
  CostParams p;
  try {
    p.t_comp_client_s = j.at("t_comp_client").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError("t_comp_client: need an array of per-client seconds");
  }
  p.t_comm_s = field_or<double>(j, "t_comm", 0.0, "");
  p.t_agg_s = field_or<double>(j, "t_agg", 0.0, "");
  p.t_comp_server_s = field_or<double>(j, "t_comp_server", 0.0, "");
  p.extra_client_layers_factor =
      field_or<double>(j, "extra_client_layers_factor", 1.0, "");
  return p;
}

std::vector<std::string> cost_model_records(const CostParams& params) {
  std::vector<std::string> lines;
  for (Method m : {Method::fedavg, Method::sl, Method::sl_plus, Method::sfl, Method::tl}) {
    json line = {{"method", method_name(m)}, {"runtime_s", estimate_runtime(m, params)}};
    lines.push_back(line.dump());
  }
  return lines;
}

}  // namespace tlearn
