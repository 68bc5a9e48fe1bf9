// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tlearn/errors.hpp"

namespace tlearn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_params(const CostParams& p) {
  if (p.t_comp_client_s.empty()) throw ValidationError("cost model needs at least one client");
  for (double t : p.t_comp_client_s) {
    if (t < 0.0) throw ValidationError("client compute times must be non-negative");
  }
  if (p.t_comm_s < 0.0 || p.t_agg_s < 0.0 || p.t_comp_server_s < 0.0) {
    throw ValidationError("cost parameters must be non-negative");
  }
  if (p.extra_client_layers_factor < 1.0) {
    throw ValidationError("extra_client_layers_factor must be >= 1");
  }
}

double max_client(const CostParams& p) {
  return *std::max_element(p.t_comp_client_s.begin(), p.t_comp_client_s.end());
}

/// Serially-used resource; acquire() reserves it FIFO in call order.
struct FifoResource {
  double free_at_ms = 0.0;

  double acquire(double ready_ms, double duration_ms) {
    const double start = std::max(ready_ms, free_at_ms);
    free_at_ms = start + duration_ms;
    return free_at_ms;
  }
};

double transfer_ms(double bytes, const LinkModel& link) {
  if (link.bandwidth_bytes_per_ms <= 0.0) throw ValidationError("bandwidth must be positive");
  return bytes / link.bandwidth_bytes_per_ms;  // inf bandwidth -> 0
}

}  // namespace

double estimate_runtime(Method method, const CostParams& params) {
  validate_params(params);
  const double comm = params.t_comm_s;
  switch (method) {
    case Method::fedavg:
      return max_client(params) + comm + params.t_agg_s;
    case Method::sl: {
      double total = 0.0;
      for (double t : params.t_comp_client_s) total += t + 2.0 * comm;
      return total + params.t_comp_server_s;
    }
    case Method::sl_plus: {
      double total = 0.0;
      for (double t : params.t_comp_client_s) {
        total += params.extra_client_layers_factor * t + 2.0 * comm;
      }
      return total + params.t_comp_server_s;
    }
    case Method::sfl: {
      double worst = 0.0;
      for (double t : params.t_comp_client_s) worst = std::max(worst, t + 2.0 * comm);
      return worst + params.t_agg_s;
    }
    case Method::tl:
      return max_client(params) + comm + params.t_comp_server_s;
    case Method::cl:
      break;
  }
  throw ValidationError("no closed-form runtime model for method " + method_name(method));
}

void SimClock::schedule(double time_ms, std::function<void()> event) {
  queue_.push({std::max(time_ms, now_), next_seq_++, std::move(event)});
}

void SimClock::run() {
  while (!queue_.empty()) {
    Entry e = queue_.top();
    queue_.pop();
    now_ = e.time;  // non-decreasing by construction
    e.event();
  }
}

double simulate_round(const TraversalPlan& plan, const LatencyModel& latency,
                      const MessageSizes& sizes, bool pipelined) {
  const std::size_t batch_count = plan.batches.size();
  if (batch_count == 0) return 0.0;

  std::size_t node_count = 0;
  for (const BatchPlan& bp : plan.batches) {
    for (const TraversalStep& step : bp.steps) {
      node_count = std::max<std::size_t>(node_count, step.node_id + 1);
    }
  }
  if (latency.links.size() < node_count || latency.node_fp_rate.size() < node_count) {
    throw ValidationError("latency model does not cover every node in the plan");
  }
  if (latency.orchestrator_bp_rate <= 0.0) throw ValidationError("bp rate must be positive");

  // Per-node step sequences in batch order.
  struct NodeJob {
    std::size_t batch = 0;
    double compute_ms = 0.0;
    double report_bytes = 0.0;
  };
  std::vector<std::vector<NodeJob>> jobs(node_count);
  std::vector<std::size_t> reports_pending(batch_count, 0);
  std::vector<double> bp_ms(batch_count, 0.0);
  for (std::size_t b = 0; b < batch_count; ++b) {
    const BatchPlan& bp = plan.batches[b];
    for (const TraversalStep& step : bp.steps) {
      const double rate = latency.node_fp_rate[step.node_id];
      if (rate <= 0.0) throw ValidationError("node fp rate must be positive");
      const double samples = static_cast<double>(step.local_indices.size());
      jobs[step.node_id].push_back(
          {b, samples / rate,
           sizes.report_fixed_bytes + sizes.report_bytes_per_sample * samples});
      ++reports_pending[b];
    }
    bp_ms[b] = static_cast<double>(bp.batch_size) / latency.orchestrator_bp_rate;
  }

  SimClock clock;
  std::vector<FifoResource> node_cpu(node_count);
  std::vector<FifoResource> uplink(node_count);
  std::vector<FifoResource> downlink(node_count);
  FifoResource bp;
  std::vector<std::size_t> next_job(node_count, 0);
  std::vector<std::size_t> assigned_jobs(node_count, 0);  // jobs whose assignment arrived
  std::vector<std::size_t> model_arrivals(batch_count, 0);
  std::vector<bool> bp_ready(batch_count, false);
  std::size_t next_bp = 0;
  double finish_ms = 0.0;

  // Forward declarations tied together through std::function.
  std::function<void(std::size_t)> try_start_node;
  std::function<void(std::size_t)> release_assignments;
  std::function<void(std::size_t)> start_ready_bp;

  try_start_node = [&](std::size_t node) {
    while (next_job[node] < jobs[node].size() && next_job[node] < assigned_jobs[node]) {
      const NodeJob& job = jobs[node][next_job[node]];
      ++next_job[node];
      const double compute_done = node_cpu[node].acquire(clock.now_ms(), job.compute_ms);
      clock.schedule(compute_done, [&, node, job] {
        const double sent = uplink[node].acquire(clock.now_ms(),
                                                 transfer_ms(job.report_bytes, latency.links[node]));
        const double arrival = sent + latency.links[node].latency_ms;
        clock.schedule(arrival, [&, job] {
          if (--reports_pending[job.batch] == 0) {
            bp_ready[job.batch] = true;
            start_ready_bp(job.batch);
          }
        });
      });
    }
  };

  // Assignments are small control messages: delayed by latency plus their
  // serialized size, but they do not occupy the data link.
  release_assignments = [&](std::size_t batch) {
    const BatchPlan& bp_plan = plan.batches[batch];
    for (const TraversalStep& step : bp_plan.steps) {
      const std::uint32_t node = step.node_id;
      const double arrival = clock.now_ms() + latency.links[node].latency_ms +
                             transfer_ms(sizes.assignment_bytes, latency.links[node]);
      clock.schedule(arrival, [&, node] {
        ++assigned_jobs[node];
        try_start_node(node);
      });
    }
  };

  start_ready_bp = [&](std::size_t) {
    while (next_bp < batch_count && bp_ready[next_bp]) {
      const std::size_t batch = next_bp++;
      const double done = bp.acquire(clock.now_ms(), bp_ms[batch]);
      clock.schedule(done, [&, batch] {
        // Redistribute the updated model to every node.
        for (std::size_t node = 0; node < node_count; ++node) {
          const double sent =
              downlink[node].acquire(clock.now_ms(), transfer_ms(sizes.model_bytes, latency.links[node]));
          const double arrival = sent + latency.links[node].latency_ms;
          clock.schedule(arrival, [&, batch] {
            if (++model_arrivals[batch] == node_count) {
              if (batch + 1 == batch_count) finish_ms = clock.now_ms();
              if (!pipelined && batch + 1 < batch_count) release_assignments(batch + 1);
            }
          });
        }
      });
    }
  };

  // Initial broadcast, then either the first batch's assignments (barriered
  // mode) or every batch's assignments up front (pipelined mode).
  std::size_t initial_arrivals = 0;
  for (std::size_t node = 0; node < node_count; ++node) {
    const double sent = downlink[node].acquire(0.0, transfer_ms(sizes.model_bytes, latency.links[node]));
    clock.schedule(sent + latency.links[node].latency_ms, [&] {
      if (++initial_arrivals == node_count) {
        if (pipelined) {
          for (std::size_t b = 0; b < batch_count; ++b) release_assignments(b);
        } else {
          release_assignments(0);
        }
      }
    });
  }

  clock.run();
  return finish_ms / 1000.0;
}

double simulate_method(Method method, const CostParams& params, std::size_t n_batches,
                       bool pipelined) {
  validate_params(params);
  if (n_batches == 0) throw ValidationError("n_batches must be positive");
  const std::size_t clients = params.t_comp_client_s.size();
  const double comm_ms = params.t_comm_s * 1000.0;
  const double agg_ms = params.t_agg_s * 1000.0;
  const double serv_ms = params.t_comp_server_s * 1000.0;
  const double latency_ms = 0.01;  // per-message granularity term

  if (method == Method::tl) {
    // Shard sizes proportional to client compute times; rates, bandwidth, and
    // payload sizes derived so the epoch aggregates reproduce the CostParams.
    const std::size_t per_batch = 900;
    const std::size_t total = per_batch * n_batches;
    double t_sum = 0.0;
    for (double t : params.t_comp_client_s) t_sum += t;
    std::vector<std::uint32_t> counts(clients, 1);
    std::size_t assigned = clients;
    for (std::size_t i = 0; i < clients && assigned < total; ++i) {
      const double share = t_sum > 0.0 ? params.t_comp_client_s[i] / t_sum
                                       : 1.0 / static_cast<double>(clients);
      const auto want = static_cast<std::size_t>(share * static_cast<double>(total));
      const std::size_t grant = std::min(want > 0 ? want - 1 : 0, total - assigned);
      counts[i] += static_cast<std::uint32_t>(grant);
      assigned += grant;
    }
    counts.back() += static_cast<std::uint32_t>(total - assigned);

    const auto reports = collect_index_ranges(counts);
    const GlobalIndexMap map = build_global_index(reports, false, 0);
    const auto batches = shuffle_into_batches(map, per_batch, 1234);
    const TraversalPlan plan = generate_traversal_plan(batches, map);

    LatencyModel latency;
    MessageSizes sizes;
    const double bw = 1000.0;  // bytes per ms
    std::uint32_t n_max = *std::max_element(counts.begin(), counts.end());
    for (std::size_t i = 0; i < clients; ++i) {
      latency.links.push_back({latency_ms, bw});
      const double t_ms = params.t_comp_client_s[i] * 1000.0;
      latency.node_fp_rate.push_back(t_ms > 0.0 ? counts[i] / t_ms : kInf);
    }
    latency.orchestrator_bp_rate =
        serv_ms > 0.0 ? static_cast<double>(total) / serv_ms : kInf;
    sizes.report_bytes_per_sample = comm_ms / 2.0 * bw / static_cast<double>(n_max);
    sizes.model_bytes = comm_ms / 2.0 * bw / static_cast<double>(n_batches);
    return simulate_round(plan, latency, sizes, pipelined);
  }

  SimClock clock;
  double finish_ms = 0.0;
  const auto mark_finish = [&] { finish_ms = std::max(finish_ms, clock.now_ms()); };

  switch (method) {
    case Method::fedavg: {
      // Broadcast down, parallel local epochs in batch-sized chunks, upload,
      // aggregate after the last upload.
      std::size_t uploads = 0;
      for (std::size_t i = 0; i < clients; ++i) {
        const double comp_ms = params.t_comp_client_s[i] * 1000.0;
        const double down = latency_ms + comm_ms / 2.0;
        const double up = down + comp_ms + latency_ms + comm_ms / 2.0;
        clock.schedule(up, [&] {
          if (++uploads == clients) {
            clock.schedule(clock.now_ms() + agg_ms, mark_finish);
          }
        });
      }
      break;
    }
    case Method::sl:
    case Method::sl_plus: {
      // Clients sequential; per batch: client chunk, activations up, server
      // chunk, gradients down. Server work splits evenly across clients.
      const double factor = method == Method::sl_plus ? params.extra_client_layers_factor : 1.0;
      double t = 0.0;
      for (std::size_t i = 0; i < clients; ++i) {
        const double comp_chunk =
            factor * params.t_comp_client_s[i] * 1000.0 / static_cast<double>(n_batches);
        const double comm_chunk = comm_ms / static_cast<double>(n_batches);
        const double serv_chunk =
            serv_ms / static_cast<double>(clients) / static_cast<double>(n_batches);
        for (std::size_t b = 0; b < n_batches; ++b) {
          t += comp_chunk + latency_ms + comm_chunk + serv_chunk + latency_ms + comm_chunk;
        }
      }
      clock.schedule(t, mark_finish);
      break;
    }
    case Method::sfl: {
      // Parallel SL against per-client replicas, then aggregation.
      std::size_t done = 0;
      for (std::size_t i = 0; i < clients; ++i) {
        const double comp_chunk =
            params.t_comp_client_s[i] * 1000.0 / static_cast<double>(n_batches);
        const double comm_chunk = comm_ms / static_cast<double>(n_batches);
        double t = 0.0;
        for (std::size_t b = 0; b < n_batches; ++b) {
          t += comp_chunk + latency_ms + comm_chunk + latency_ms + comm_chunk;
        }
        clock.schedule(t, [&] {
          if (++done == clients) {
            clock.schedule(clock.now_ms() + agg_ms, mark_finish);
          }
        });
      }
      break;
    }
    case Method::tl:
    case Method::cl:
      throw ValidationError("unsupported method in simulate_method");
  }

  clock.run();
  return finish_ms / 1000.0;
}

}  // namespace tlearn
