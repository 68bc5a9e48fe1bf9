// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/transport.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>

#include "tlearn/errors.hpp"

namespace tlearn {

namespace {
constexpr auto kCollectTimeout = std::chrono::seconds(60);
}

NodeWorker::NodeWorker(NodeShard shard) { state_.shard = std::move(shard); }

const MLPModel& NodeWorker::model() const {
  if (!has_model_) throw TransportError("node has no model yet");
  return state_.model;
}

Message NodeWorker::handle(const Message& request) {
  Message reply;
  reply.source = node_id();
  reply.destination = kOrchestratorId;
  switch (request.kind) {
    case MessageKind::IndexRangeMsg: {
      reply.kind = MessageKind::IndexRangeMsg;
      reply.payload = encode_index_range_payload(make_index_range_report(state_));
      return reply;
    }
    case MessageKind::ModelBroadcast: {
      state_.model = deserialize_model(request.payload);
      has_model_ = true;
      reply.kind = MessageKind::Ack;
      return reply;
    }
    case MessageKind::StepAssignment: {
      if (!has_model_) throw TransportError("step assigned before any model broadcast");
      auto [step, loss] = decode_step_payload(request.payload);
      reply.kind = MessageKind::NodeReportMsg;
      reply.payload = serialize_report(node_forward_report(state_, step, loss));
      return reply;
    }
    case MessageKind::NodeReportMsg:
    case MessageKind::Ack:
      break;
  }
  throw TransportError("node cannot handle message kind " +
                       std::to_string(static_cast<int>(request.kind)));
}

void Transport::account_outbound(const Message& m) {
  std::lock_guard lock(account_mutex_);
  bytes_to_nodes_ += m.payload.size() + kFrameHeaderSize;
  ++message_count_;
  if (on_message) on_message(m);
}

void Transport::account_inbound(const Message& m) {
  std::lock_guard lock(account_mutex_);
  bytes_to_orchestrator_ += m.payload.size() + kFrameHeaderSize;
  ++message_count_;
  if (transcript_enabled_) transcript_.push_back(m);
  if (on_message) on_message(m);
}

struct InProcessTransport::WorkerRuntime {
  explicit WorkerRuntime(NodeShard shard) : worker(std::move(shard)) {}

  NodeWorker worker;
  std::thread thread;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Message> tasks;
  bool stop = false;
};

InProcessTransport::InProcessTransport(std::vector<NodeShard> shards, bool concurrent)
    : concurrent_(concurrent) {
  if (shards.empty()) throw ConfigError("transport needs at least one node");
  std::sort(shards.begin(), shards.end(),
            [](const NodeShard& a, const NodeShard& b) { return a.node_id < b.node_id; });
  for (std::size_t i = 1; i < shards.size(); ++i) {
    if (shards[i].node_id == shards[i - 1].node_id) {
      throw ConfigError("duplicate node id " + std::to_string(shards[i].node_id));
    }
  }
  for (auto& shard : shards) {
    workers_.push_back(std::make_unique<WorkerRuntime>(std::move(shard)));
  }
  if (concurrent_) {
    for (auto& rt : workers_) {
      WorkerRuntime* w = rt.get();
      w->thread = std::thread([this, w] {
        for (;;) {
          Message task;
          {
            std::unique_lock lock(w->mutex);
            w->cv.wait(lock, [w] { return w->stop || !w->tasks.empty(); });
            if (w->stop && w->tasks.empty()) return;
            task = std::move(w->tasks.front());
            w->tasks.pop_front();
          }
          deliver(w->worker.handle(task));
        }
      });
    }
  }
}

InProcessTransport::~InProcessTransport() {
  if (concurrent_) {
    for (auto& w : workers_) {
      {
        std::lock_guard lock(w->mutex);
        w->stop = true;
      }
      w->cv.notify_all();
    }
    for (auto& w : workers_) {
      if (w->thread.joinable()) w->thread.join();
    }
  }
}

std::vector<std::uint32_t> InProcessTransport::node_ids() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(workers_.size());
  for (const auto& w : workers_) ids.push_back(w->worker.node_id());
  return ids;
}

InProcessTransport::WorkerRuntime& InProcessTransport::runtime_for(std::uint32_t node_id) {
  for (auto& w : workers_) {
    if (w->worker.node_id() == node_id) return *w;
  }
  throw TransportError("unknown destination node " + std::to_string(node_id));
}

void InProcessTransport::deliver(Message reply) {
  account_inbound(reply);
  {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(std::move(reply));
  }
  inbox_cv_.notify_one();
}

void InProcessTransport::post(const Message& message) {
  WorkerRuntime& rt = runtime_for(message.destination);
  account_outbound(message);
  if (!concurrent_) {
    deliver(rt.worker.handle(message));
    return;
  }
  {
    std::lock_guard lock(rt.mutex);
    rt.tasks.push_back(message);
  }
  rt.cv.notify_one();
}

Message InProcessTransport::collect() {
  std::unique_lock lock(inbox_mutex_);
  if (!inbox_cv_.wait_for(lock, kCollectTimeout, [this] { return !inbox_.empty(); })) {
    throw TransportError("timed out waiting for a node message");
  }
  Message m = std::move(inbox_.front());
  inbox_.pop_front();
  return m;
}

const NodeWorker& InProcessTransport::worker(std::uint32_t node_id) const {
  for (const auto& w : workers_) {
    if (w->worker.node_id() == node_id) return w->worker;
  }
  throw TransportError("unknown node " + std::to_string(node_id));
}

}  // namespace tlearn
