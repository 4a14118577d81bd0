// Copyright 2026 The TW2 Teleop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tw2/errors.hpp"

namespace tw2 {

inline constexpr std::array<std::uint8_t, 4> kWireMagic{'T', 'W', '2', 'B'};
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderSize = 24;
inline constexpr std::uint32_t kMaxPayload = 4u << 20;

/// Message types double as topics.
enum class MsgType : std::uint8_t {
  kPose = 1,
  kCmd = 2,
  kState = 3,
  kFrame = 4,
  kCtrl = 5,
  kHandshake = 6,
  kLatency = 7,
  kInferReq = 8,
  kInferResp = 9,
};

inline constexpr std::uint8_t kFlagAck = 0x01;    // CTRL: broker accepted the event
inline constexpr std::uint8_t kFlagNack = 0x02;   // CTRL: broker rejected the event
inline constexpr std::uint8_t kFlagReply = 0x04;  // LATENCY: echoed probe; CTRL: verdict to sender
inline constexpr std::uint8_t kFlagError = 0x08;  // HANDSHAKE / INFER_RESP: payload is an error

bool is_valid_type(std::uint8_t t);
std::string_view type_name(MsgType t);
/// Lower-case topic name ("cmd", "state", ...) to type; throws std::invalid_argument.
MsgType parse_type(std::string_view name);

/// Byte layout (little-endian):
///   0  magic "TW2B"   4  version u8   5  type u8   6  flags u8   7  reserved u8
///   8  seq u32       12  timestamp u64 (ns)       20  payload length u32
struct Header {
  MsgType type = MsgType::kCmd;
  std::uint8_t flags = 0;
  std::uint32_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  std::uint32_t payload_len = 0;
};

struct Message {
  MsgType type = MsgType::kCmd;
  std::uint8_t flags = 0;
  std::uint32_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const Message&) const = default;
};

std::array<std::uint8_t, kHeaderSize> encode_header(const Header& h);
/// Throws ProtocolError on bad magic, version, type or oversize length.
Header decode_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode(const Message& m);
/// Decodes exactly one message occupying all of `bytes`.
Message decode(std::span<const std::uint8_t> bytes);

}  // namespace tw2
