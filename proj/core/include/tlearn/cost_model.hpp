// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "tlearn/method.hpp"
#include "tlearn/virtual_batch.hpp"

namespace tlearn {

/// Inputs of the closed-form per-epoch runtime models, in seconds.
struct CostParams {
  std::vector<double> t_comp_client_s;     // per client
  double t_comm_s = 0.0;
  double t_agg_s = 0.0;
  double t_comp_server_s = 0.0;
  double extra_client_layers_factor = 1.0; // SL+ client-side scaling, >= 1
};

/// Closed forms:
///   T_FL  = max_i(T_comp,i) + T_comm + T_agg
///   T_SL  = sum_i(T_comp,i + 2 T_comm) + T_comp,server
///   T_SL+ = sum_i(factor * T_comp,i + 2 T_comm) + T_comp,server
///   T_SFL = max_i(T_comp,i + 2 T_comm) + T_agg
///   T_TL  = max_i(T_comp,i) + T_comm + T_comp,server
/// SL/SL+ sum over clients because the protocol visits them sequentially.
/// SFL counts the split round trip (activations up, gradients down) inside
/// the straggler max.
double estimate_runtime(Method method, const CostParams& params);

/// Discrete-event clock: events run in (time, insertion sequence) order and
/// may schedule further events.
class SimClock {
 public:
  void schedule(double time_ms, std::function<void()> event);
  void run();
  double now_ms() const { return now_; }

 private:
  struct Entry {
    double time = 0.0;
    std::uint64_t seq = 0;
    std::function<void()> event;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time > b.time || (a.time == b.time && a.seq > b.seq);
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
};

/// Per-link transfer parameters; node compute rates. Indexed by node id.
struct LinkModel {
  double latency_ms = 0.0;
  double bandwidth_bytes_per_ms = 0.0;  // may be +inf
};

struct LatencyModel {
  std::vector<LinkModel> links;       // orchestrator <-> node i
  std::vector<double> node_fp_rate;   // samples per ms, per node
  double orchestrator_bp_rate = 0.0;  // samples per ms
};

/// Simulated payload sizes. Fractional bytes are allowed; these parameterize
/// the event simulation, not a real encoder.
struct MessageSizes {
  double model_bytes = 0.0;
  double assignment_bytes = 0.0;  // control-plane, does not occupy the link
  double report_fixed_bytes = 0.0;
  double report_bytes_per_sample = 0.0;
};

/// Discrete-event simulation of one TL epoch over the given traversal plan:
/// initial model broadcast, step assignments, node forward computation,
/// report transmission, serial per-batch server BP, and per-batch model
/// redistribution. Non-pipelined mode keeps a global barrier between batches;
/// pipelined mode lets each node start its next step as soon as it is free,
/// overlapping the next batch's forward pass with collection and BP.
/// Returns simulated seconds.
double simulate_round(const TraversalPlan& plan, const LatencyModel& latency,
                      const MessageSizes& sizes, bool pipelined);

/// Realizes the closed-form scenario of a method as an event simulation at
/// n_batches granularity and returns the simulated seconds. The TL path runs
/// through simulate_round on a generated traversal plan.
double simulate_method(Method method, const CostParams& params, std::size_t n_batches,
                       bool pipelined = false);

}  // namespace tlearn
