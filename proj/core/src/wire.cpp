// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/wire.hpp"

#include <string>

#include "tlearn/errors.hpp"
#include "tlearn/serialize.hpp"

namespace tlearn {

std::vector<std::uint8_t> frame_encode(const Message& message) {
  ByteWriter w;
  w.magic("TLFR");
  w.u8(static_cast<std::uint8_t>(message.kind));
  w.u32(message.source);
  w.u32(message.destination);
  w.u64(message.payload.size());
  w.bytes(message.payload);
  return w.take();
}

Message frame_decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("TLFR");
  Message m;
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(MessageKind::Ack)) {
    throw FormatError("unknown message kind " + std::to_string(kind));
  }
  m.kind = static_cast<MessageKind>(kind);
  m.source = r.u32();
  m.destination = r.u32();
  const std::uint64_t len = r.u64();
  if (len != r.remaining()) {
    throw FormatError("frame payload length " + std::to_string(len) + " does not match " +
                      std::to_string(r.remaining()) + " remaining bytes");
  }
  m.payload = r.bytes(len);
  return m;
}

std::vector<std::uint8_t> encode_step_payload(const TraversalStep& step, LossKind loss) {
  ByteWriter w;
  w.u32(step.batch_id);
  w.u32(step.batch_size);
  w.u32(step.node_id);
  w.u8(static_cast<std::uint8_t>(loss));
  w.u32(static_cast<std::uint32_t>(step.local_indices.size()));
  for (std::uint32_t v : step.local_indices) w.u32(v);
  for (std::uint32_t v : step.positions) w.u32(v);
  return w.take();
}

std::pair<TraversalStep, LossKind> decode_step_payload(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  TraversalStep step;
  step.batch_id = r.u32();
  step.batch_size = r.u32();
  step.node_id = r.u32();
  const std::uint8_t loss = r.u8();
  if (loss > static_cast<std::uint8_t>(LossKind::mse)) {
    throw FormatError("unknown loss kind " + std::to_string(loss));
  }
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * 8 > r.remaining()) {
    throw FormatError("truncated step payload");
  }
  step.local_indices.resize(count);
  for (auto& v : step.local_indices) v = r.u32();
  step.positions.resize(count);
  for (auto& v : step.positions) v = r.u32();
  r.expect_done();
  return {std::move(step), static_cast<LossKind>(loss)};
}

std::vector<std::uint8_t> encode_index_range_payload(const IndexRangeReport& report) {
  ByteWriter w;
  w.u32(report.node_id);
  w.u32(report.sample_count);
  return w.take();
}

IndexRangeReport decode_index_range_payload(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  IndexRangeReport report;
  report.node_id = r.u32();
  report.sample_count = r.u32();
  r.expect_done();
  return report;
}

}  // namespace tlearn
