// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlearn/nn.hpp"
#include "tlearn/virtual_batch.hpp"

namespace tlearn {

inline constexpr std::uint32_t kOrchestratorId = 0xffffffffu;

enum class MessageKind : std::uint8_t {
  ModelBroadcast = 0,
  StepAssignment = 1,
  NodeReportMsg = 2,
  IndexRangeMsg = 3,
  Ack = 4,
};

struct Message {
  MessageKind kind = MessageKind::Ack;
  std::uint32_t source = 0;
  std::uint32_t destination = 0;
  std::vector<std::uint8_t> payload;

  std::size_t payload_size() const { return payload.size(); }
  bool operator==(const Message&) const = default;
};

// TLFR framing: magic "TLFR", u8 kind, u32 source, u32 destination, u64
// payload length (LE), payload bytes. Header is 21 bytes.
inline constexpr std::size_t kFrameHeaderSize = 21;

std::vector<std::uint8_t> frame_encode(const Message& message);
Message frame_decode(std::span<const std::uint8_t> bytes);

// StepAssignment payload: u32 batch_id, u32 batch_size, u32 node_id, u8 loss
// kind, u32 count, u32 local_indices[count], u32 positions[count].
std::vector<std::uint8_t> encode_step_payload(const TraversalStep& step, LossKind loss);
std::pair<TraversalStep, LossKind> decode_step_payload(std::span<const std::uint8_t> bytes);

// IndexRangeMsg reply payload: u32 node_id, u32 sample_count. Requests carry
// an empty payload.
std::vector<std::uint8_t> encode_index_range_payload(const IndexRangeReport& report);
IndexRangeReport decode_index_range_payload(std::span<const std::uint8_t> bytes);

}  // namespace tlearn
