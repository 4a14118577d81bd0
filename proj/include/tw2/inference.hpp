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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "tw2/net.hpp"

namespace tw2 {

inline constexpr std::uint32_t kInferenceApiVersion = 1;
inline constexpr std::size_t kChunkSteps = 64;

/// INFER_REQ payload: u32 api version, u32 history rows H, u32 dim D,
/// u32 image length, image bytes (JPEG), f64[H * D] normalized history,
/// oldest row first. The header seq is the request id.
struct InferenceRequest {
  std::uint32_t id = 0;
  std::vector<std::uint8_t> image;
  std::vector<std::vector<double>> history;
};

/// INFER_RESP payload: u32 steps, u32 dim, f64[steps * dim] normalized
/// commands. The header seq echoes the request id. With kFlagError the
/// payload is a UTF-8 message instead.
struct InferenceResponse {
  std::uint32_t id = 0;
  std::vector<std::vector<double>> steps;
};

Message encode_request(const InferenceRequest& r, std::int64_t timestamp_ns);
InferenceRequest decode_request(const Message& m);
Message encode_response(const InferenceResponse& r, std::int64_t timestamp_ns);
/// Throws ProtocolError on malformed bytes or an error reply.
InferenceResponse decode_response(const Message& m);

/// Request-reply client for one inference endpoint. Replies to requests that
/// already timed out are discarded by id.
class InferenceClient {
 public:
  InferenceClient(std::string host, std::uint16_t port);

  /// Throws TimeoutError past `timeout`, ProtocolError on a malformed or
  /// wrong-sized reply, std::system_error when the endpoint is unreachable.
  InferenceResponse call(std::span<const std::uint8_t> image,
                         const std::vector<std::vector<double>>& history,
                         std::chrono::milliseconds timeout);

 private:
  std::string host_;
  std::uint16_t port_;
  Socket sock_;
  std::uint32_t next_id_ = 1;
};

struct EchoPolicyOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::chrono::milliseconds latency{0};
  std::size_t steps = kChunkSteps;
  bool silent = false;  // accept requests but never answer
  /// Returned verbatim when set; otherwise every step repeats the newest
  /// history row.
  std::optional<std::vector<std::vector<double>>> fixed_chunk;
};

/// Stand-in inference endpoint for tests and demos.
class EchoPolicyServer {
 public:
  explicit EchoPolicyServer(EchoPolicyOptions options);
  ~EchoPolicyServer();
  EchoPolicyServer(const EchoPolicyServer&) = delete;
  EchoPolicyServer& operator=(const EchoPolicyServer&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  std::uint64_t served() const { return served_.load(); }
  void stop();

 private:
  void serve(const std::shared_ptr<Socket>& s);

  EchoPolicyOptions options_;
  TcpListener listener_;
  std::atomic<bool> running_{true};
  std::atomic<std::uint64_t> served_{0};
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<std::shared_ptr<Socket>> socks_;
  std::thread acceptor_;
};

}  // namespace tw2
