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
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tw2/net.hpp"

namespace tw2::ws {

enum Opcode : std::uint8_t {
  kContinuation = 0x0,
  kText = 0x1,
  kBinary = 0x2,
  kClose = 0x8,
  kPing = 0x9,
  kPong = 0xA,
};

struct Frame {
  bool fin = true;
  std::uint8_t opcode = kText;
  std::vector<std::uint8_t> payload;
  std::string text() const { return {payload.begin(), payload.end()}; }
};

/// Sec-WebSocket-Accept value for a client key.
std::string accept_key(std::string_view client_key);

/// Serialized frame. Clients must pass a mask, servers must not.
std::vector<std::uint8_t> encode(std::uint8_t opcode, std::span<const std::uint8_t> payload,
                                 std::optional<std::array<std::uint8_t, 4>> mask = std::nullopt);

/// Reads one frame and unmasks it; nullopt on timeout before the first byte.
/// Throws ProtocolError on oversize or a mask bit that does not match
/// `expect_masked`.
std::optional<Frame> read_frame(const Socket& s, std::chrono::milliseconds timeout,
                                bool expect_masked, std::size_t max_payload = 1 << 20);

struct HttpRequest {
  std::string method;
  std::string target;
  std::map<std::string, std::string> headers;  // lower-case names
};

/// Reads and parses an HTTP/1.1 request head. Throws ProtocolError.
HttpRequest read_request(const Socket& s, std::chrono::milliseconds timeout);

/// Completes the server side of the opening handshake, or answers 400/426
/// and throws ProtocolError.
void accept_upgrade(const Socket& s, const HttpRequest& req);

/// Client side of the opening handshake (used by tests and tools).
void client_upgrade(const Socket& s, const std::string& host, const std::string& path);

}  // namespace tw2::ws
