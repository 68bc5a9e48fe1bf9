// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tlearn/node.hpp"
#include "tlearn/wire.hpp"

namespace tlearn {

/// Handles the node side of the protocol: index-range queries, model
/// broadcasts, and step assignments.
class NodeWorker {
 public:
  explicit NodeWorker(NodeShard shard);

  Message handle(const Message& request);

  std::uint32_t node_id() const { return state_.node_id(); }
  bool has_model() const { return has_model_; }
  const MLPModel& model() const;

 private:
  NodeState state_;
  bool has_model_ = false;
};

/// Orchestrator-side message channel. post() sends one orchestrator-to-node
/// message; collect() returns the next node-to-orchestrator message, in
/// arrival order. Implementations record an optional transcript of every
/// node-to-orchestrator message for privacy audits, plus byte counters.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual std::vector<std::uint32_t> node_ids() const = 0;
  virtual void post(const Message& message) = 0;
  virtual Message collect() = 0;

  void enable_transcript() { transcript_enabled_ = true; }
  const std::vector<Message>& transcript() const { return transcript_; }

  std::size_t bytes_to_nodes() const { return bytes_to_nodes_; }
  std::size_t bytes_to_orchestrator() const { return bytes_to_orchestrator_; }
  std::size_t message_count() const { return message_count_; }

  /// Observer invoked for every message in delivery order (both directions).
  std::function<void(const Message&)> on_message;

 protected:
  void account_outbound(const Message& m);
  void account_inbound(const Message& m);

 private:
  bool transcript_enabled_ = false;
  std::vector<Message> transcript_;
  std::size_t bytes_to_nodes_ = 0;
  std::size_t bytes_to_orchestrator_ = 0;
  std::size_t message_count_ = 0;
  std::mutex account_mutex_;
};

/// Default transport: node workers live in-process. In sequential mode each
/// post is handled inline; in concurrent mode every node runs its own worker
/// thread with a FIFO task queue, so reports arrive in nondeterministic
/// order while each node still processes its own messages in posted order.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(std::vector<NodeShard> shards, bool concurrent = false);
  ~InProcessTransport() override;

  std::vector<std::uint32_t> node_ids() const override;
  void post(const Message& message) override;
  Message collect() override;

  const NodeWorker& worker(std::uint32_t node_id) const;

 private:
  struct WorkerRuntime;

  WorkerRuntime& runtime_for(std::uint32_t node_id);
  void deliver(Message reply);

  std::vector<std::unique_ptr<WorkerRuntime>> workers_;
  bool concurrent_ = false;

  std::mutex inbox_mutex_;
  std::condition_variable inbox_cv_;
  std::deque<Message> inbox_;
};

struct SocketEndpoint {
  std::uint32_t node_id = 0;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// TCP server wrapping one NodeWorker; frames use the TLFR encoding. Binds to
/// an ephemeral loopback port by default.
class SocketNodeServer {
 public:
  explicit SocketNodeServer(NodeShard shard, std::uint16_t port = 0);
  ~SocketNodeServer();

  std::uint16_t port() const { return port_; }
  std::uint32_t node_id() const { return worker_.node_id(); }
  void stop();

 private:
  void serve();

  NodeWorker worker_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread thread_;
};

/// Orchestrator-side TCP client, one connection per node, with reader threads
/// feeding the shared inbox.
class SocketTransport : public Transport {
 public:
  explicit SocketTransport(std::span<const SocketEndpoint> endpoints);
  ~SocketTransport() override;

  std::vector<std::uint32_t> node_ids() const override;
  void post(const Message& message) override;
  Message collect() override;

 private:
  struct Connection;

  void reader_loop(Connection& conn);

  std::vector<std::unique_ptr<Connection>> connections_;
  std::mutex inbox_mutex_;
  std::condition_variable inbox_cv_;
  std::deque<Message> inbox_;
  std::atomic<bool> closed_ = false;
};

}  // namespace tlearn
