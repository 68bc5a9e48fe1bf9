// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tlearn/errors.hpp"
#include "tlearn/experiment.hpp"

namespace {

using tlearn::ConfigError;
using tlearn::ExperimentConfig;

struct RunFlags {
  std::string config_path;
  std::string method;
  std::string mode;
  std::string aggregation;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t nodes = 0;
  std::size_t batch_size = 0;
  std::size_t epochs = 0;
  double lr = 0.0;
  bool seed_set = false, nodes_set = false, batch_set = false, epochs_set = false, lr_set = false;
};

ExperimentConfig build_config(const RunFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = tlearn::config_from_json_file(f.config_path);
  // Flags win over the config file.
  if (!f.method.empty()) cfg.method = tlearn::method_from_name(f.method);
  if (!f.mode.empty()) cfg.mode = tlearn::sync_mode_from_name(f.mode);
  if (!f.aggregation.empty()) cfg.aggregation = tlearn::aggregation_from_name(f.aggregation);
  if (!f.out.empty()) cfg.out_path = f.out;
  if (f.seed_set) cfg.seed = f.seed;
  if (f.nodes_set) cfg.partition.node_count = f.nodes;
  if (f.batch_set) cfg.batch_size = f.batch_size;
  if (f.epochs_set) cfg.epochs = f.epochs;
  if (f.lr_set) cfg.learning_rate = f.lr;
  return cfg;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--method", f.method, "cl|tl|fedavg|sl|sl_plus|sfl");
  cmd->add_option("--mode", f.mode, "deterministic|pipelined");
  cmd->add_option("--aggregation", f.aggregation, "per-sample|eq6-mean");
  cmd->add_option("--out", f.out, "metrics output path (JSON lines)");
  cmd->add_option("--seed", f.seed)->each([&](const std::string&) { f.seed_set = true; });
  cmd->add_option("--nodes", f.nodes)->each([&](const std::string&) { f.nodes_set = true; });
  cmd->add_option("--batch-size", f.batch_size)->each([&](const std::string&) { f.batch_set = true; });
  cmd->add_option("--epochs", f.epochs)->each([&](const std::string&) { f.epochs_set = true; });
  cmd->add_option("--lr", f.lr)->each([&](const std::string&) { f.lr_set = true; });
}

std::vector<std::uint32_t> parse_counts(const std::string& csv) {
  std::vector<std::uint32_t> counts;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    try {
      counts.push_back(static_cast<std::uint32_t>(std::stoul(item)));
    } catch (const std::exception&) {
      throw ConfigError("node-samples: cannot parse \"" + item + "\"");
    }
  }
  if (counts.empty()) throw ConfigError("node-samples: empty list");
  return counts;
}

void print_lines(const std::vector<std::string>& lines, const std::string& out_path) {
  if (out_path.empty()) {
    for (const auto& line : lines) std::cout << line << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw ConfigError("out: cannot write " + out_path);
  for (const auto& line : lines) out << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tlearn: traversal learning and distributed-training baselines"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  RunFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "train one method and evaluate it");
  add_run_flags(run_cmd, run_flags);

  std::string cfg_a, cfg_b, compare_out;
  std::size_t n_seeds = 20;
  CLI::App* compare_cmd = app.add_subcommand("compare", "run two configs across seed offsets");
  compare_cmd->add_option("--config-a", cfg_a, "first JSON config")->required();
  compare_cmd->add_option("--config-b", cfg_b, "second JSON config")->required();
  compare_cmd->add_option("--seeds", n_seeds, "number of seed offsets (default 20)");
  compare_cmd->add_option("--out", compare_out, "report output path");

  std::string plan_config, node_samples, plan_out;
  std::size_t plan_batch = 32;
  std::uint64_t plan_seed = 0;
  CLI::App* plan_cmd = app.add_subcommand("plan", "print the traversal plan as JSON lines");
  plan_cmd->add_option("--config", plan_config, "JSON config (dataset + partition)");
  plan_cmd->add_option("--node-samples", node_samples, "per-node sample counts, e.g. 3,2,4");
  plan_cmd->add_option("--batch-size", plan_batch, "virtual batch size");
  plan_cmd->add_option("--seed", plan_seed, "shuffle seed");
  plan_cmd->add_option("--out", plan_out, "output path");

  std::string cost_params_path, cost_out;
  CLI::App* cost_cmd = app.add_subcommand("cost-model", "closed-form runtime per method");
  cost_cmd->add_option("--params", cost_params_path, "JSON cost parameters")->required();
  cost_cmd->add_option("--out", cost_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    if (*run_cmd) {
      const ExperimentConfig cfg = build_config(run_flags);
      const tlearn::RunOutput output = tlearn::run_experiment(cfg);
      tlearn::emit_metrics(cfg, output);
      return 0;
    }
    if (*compare_cmd) {
      const auto report = tlearn::compare_experiments(tlearn::config_from_json_file(cfg_a),
                                                      tlearn::config_from_json_file(cfg_b),
                                                      n_seeds);
      print_lines({report.to_json()}, compare_out);
      return 0;
    }
    if (*plan_cmd) {
      std::vector<std::uint32_t> counts;
      if (!node_samples.empty()) {
        counts = parse_counts(node_samples);
      } else if (!plan_config.empty()) {
        const ExperimentConfig cfg = tlearn::config_from_json_file(plan_config);
        cfg.validate();
        const tlearn::Dataset data = tlearn::load_dataset_from_spec(cfg.dataset, cfg.seed);
        const auto shards = tlearn::partition(data, cfg.partition);
        for (const auto& shard : shards) counts.push_back(static_cast<std::uint32_t>(shard.size()));
      } else {
        throw ConfigError("plan needs --config or --node-samples");
      }
      print_lines(tlearn::plan_records(counts, plan_batch, plan_seed), plan_out);
      return 0;
    }
    if (*cost_cmd) {
      const auto params = tlearn::cost_params_from_json_file(cost_params_path);
      print_lines(tlearn::cost_model_records(params), cost_out);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const tlearn::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const tlearn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
