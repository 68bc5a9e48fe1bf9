// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "tlearn/errors.hpp"
#include "tlearn/serialize.hpp"
#include "tlearn/transport.hpp"

namespace tlearn {

namespace {

constexpr auto kCollectTimeout = std::chrono::seconds(60);

bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) return false;  // peer closed
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(r);
  }
}

/// Reads one TLFR frame; returns false on a clean EOF before the header.
bool read_frame(int fd, Message& out) {
  std::vector<std::uint8_t> frame(kFrameHeaderSize);
  if (!read_exact(fd, frame.data(), frame.size())) return false;
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) {
    len |= static_cast<std::uint64_t>(frame[13 + i]) << (8 * i);
  }
  if (len > (1ull << 32)) throw FormatError("frame payload implausibly large");
  frame.resize(kFrameHeaderSize + len);
  if (len > 0 && !read_exact(fd, frame.data() + kFrameHeaderSize, len)) {
    throw FormatError("truncated frame on socket");
  }
  out = frame_decode(frame);
  return true;
}

void send_frame(int fd, const Message& m) {
  const auto bytes = frame_encode(m);
  write_all(fd, bytes.data(), bytes.size());
}

}  // namespace

SocketNodeServer::SocketNodeServer(NodeShard shard, std::uint16_t port)
    : worker_(std::move(shard)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("cannot create server socket");
  int opt = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof(opt));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 1) != 0) {
    ::close(listen_fd_);
    throw TransportError(std::string("cannot bind node server: ") + std::strerror(errno));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  thread_ = std::thread([this] { serve(); });
}

SocketNodeServer::~SocketNodeServer() { stop(); }

void SocketNodeServer::stop() {
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (thread_.joinable()) thread_.join();
}

void SocketNodeServer::serve() {
  for (;;) {
    const int conn = ::accept(listen_fd_, nullptr, nullptr);
    if (conn < 0) return;  // listener closed
    try {
      Message request;
      while (read_frame(conn, request)) {
        send_frame(conn, worker_.handle(request));
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "node %u connection error: %s\n", worker_.node_id(), e.what());
    }
    ::close(conn);
  }
}

struct SocketTransport::Connection {
  std::uint32_t node_id = 0;
  int fd = -1;
  std::thread reader;
  std::mutex write_mutex;
};

SocketTransport::SocketTransport(std::span<const SocketEndpoint> endpoints) {
  if (endpoints.empty()) throw ConfigError("transport needs at least one node");
  for (const auto& ep : endpoints) {
    auto conn = std::make_unique<Connection>();
    conn->node_id = ep.node_id;
    conn->fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (conn->fd < 0) throw TransportError("cannot create client socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
      throw TransportError("bad node address " + ep.host);
    }
    if (::connect(conn->fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw TransportError("cannot connect to node " + std::to_string(ep.node_id) + ": " +
                           std::strerror(errno));
    }
    connections_.push_back(std::move(conn));
  }
  std::sort(connections_.begin(), connections_.end(),
            [](const auto& a, const auto& b) { return a->node_id < b->node_id; });
  for (auto& conn : connections_) {
    Connection* c = conn.get();
    c->reader = std::thread([this, c] { reader_loop(*c); });
  }
}

SocketTransport::~SocketTransport() {
  closed_ = true;
  for (auto& c : connections_) {
    if (c->fd >= 0) {
      ::shutdown(c->fd, SHUT_RDWR);
    }
  }
  for (auto& c : connections_) {
    if (c->reader.joinable()) c->reader.join();
    if (c->fd >= 0) ::close(c->fd);
  }
}

void SocketTransport::reader_loop(Connection& conn) {
  try {
    Message m;
    while (read_frame(conn.fd, m)) {
      account_inbound(m);
      {
        std::lock_guard lock(inbox_mutex_);
        inbox_.push_back(std::move(m));
      }
      inbox_cv_.notify_one();
    }
  } catch (const std::exception& e) {
    if (!closed_) {
      std::fprintf(stderr, "reader for node %u failed: %s\n", conn.node_id, e.what());
    }
  }
}

std::vector<std::uint32_t> SocketTransport::node_ids() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(connections_.size());
  for (const auto& c : connections_) ids.push_back(c->node_id);
  return ids;
}

void SocketTransport::post(const Message& message) {
  for (auto& c : connections_) {
    if (c->node_id == message.destination) {
      account_outbound(message);
      std::lock_guard lock(c->write_mutex);
      send_frame(c->fd, message);
      return;
    }
  }
  throw TransportError("unknown destination node " + std::to_string(message.destination));
}

Message SocketTransport::collect() {
  std::unique_lock lock(inbox_mutex_);
  if (!inbox_cv_.wait_for(lock, kCollectTimeout, [this] { return !inbox_.empty(); })) {
    throw TransportError("timed out waiting for a node message");
  }
  Message m = std::move(inbox_.front());
  inbox_.pop_front();
  return m;
}

}  // namespace tlearn
