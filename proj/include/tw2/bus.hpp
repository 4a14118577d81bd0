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
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tw2/net.hpp"
#include "tw2/session.hpp"

namespace tw2 {

inline constexpr std::uint16_t kDefaultBusPort = 7447;
inline constexpr std::uint16_t kDefaultBridgePort = 7448;

/// Bus port from TW2_BUS_PORT, else 7447.
std::uint16_t default_bus_port();
/// Bridge port from TW2_BRIDGE_PORT, else 7448.
std::uint16_t default_bridge_port();

struct ClientOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultBusPort;
  std::string name = "client";
  std::vector<MsgType> subscribe;
  nlohmann::json layout;  // null: accept the broker's
  std::size_t queue_limit = 1 << 16;
  std::chrono::milliseconds timeout{2000};
};

/// One bus connection: synchronous publish, background receive into a queue.
class BusClient {
 public:
  /// Connects and completes the handshake. Throws ProtocolError when the
  /// broker rejects it (version or layout mismatch).
  explicit BusClient(ClientOptions options);
  ~BusClient();
  BusClient(const BusClient&) = delete;
  BusClient& operator=(const BusClient&) = delete;

  /// Broker handshake reply: {version, layout, mode, ...}.
  const nlohmann::json& handshake() const { return handshake_; }
  const std::string& name() const { return options_.name; }

  /// Publishes with this client's next seq for the type; returns that seq.
  std::uint32_t publish(MsgType type, std::span<const std::uint8_t> payload,
                        std::optional<std::uint64_t> timestamp_ns = std::nullopt,
                        std::uint8_t flags = 0);

  std::optional<Message> receive(std::chrono::milliseconds timeout);
  bool connected() const { return connected_.load(); }
  std::string error() const;
  std::uint64_t dropped() const { return dropped_.load(); }
  void close();

 private:
  void read_loop();

  ClientOptions options_;
  Socket sock_;
  nlohmann::json handshake_;
  std::mutex write_mu_;
  std::array<std::uint32_t, 10> seq_{};
  std::uint64_t last_ts_ = 0;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> inbox_;
  std::string error_;
  std::atomic<bool> connected_{false};
  std::atomic<bool> closing_{false};
  std::atomic<std::uint64_t> dropped_{0};
  std::thread reader_;
};

struct BrokerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultBusPort;  // 0 picks a free port
  nlohmann::json layout;                 // null: adopt the first client's
  std::size_t queue_limit = 1 << 14;     // per subscriber, messages
};

struct BrokerStats {
  std::uint64_t received = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t protocol_errors = 0;
  std::size_t connections = 0;
};

/// Topic fanout broker. Owns the authoritative session mode: CTRL events are
/// validated here, acknowledged to the sender and broadcast when legal.
class Broker {
 public:
  explicit Broker(BrokerConfig config);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  Mode mode() const;
  BrokerStats stats() const;
  void stop();

 private:
  struct Conn;
  void accept_loop();
  void serve(const std::shared_ptr<Conn>& c);
  void writer_loop(const std::shared_ptr<Conn>& c);
  bool handshake(const std::shared_ptr<Conn>& c);
  void route(const std::shared_ptr<Conn>& from, Message m);
  void handle_ctrl(const std::shared_ptr<Conn>& from, const Message& m);
  void enqueue(Conn& c, std::shared_ptr<const std::vector<std::uint8_t>> bytes);
  void fanout(MsgType type, std::uint8_t flags, std::uint64_t ts,
              std::span<const std::uint8_t> payload, const Conn* except);
  void reap();

  BrokerConfig config_;
  TcpListener listener_;
  std::atomic<bool> running_{true};
  std::thread acceptor_;

  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::array<std::uint32_t, 10> topic_seq_{};
  Mode mode_ = Mode::kIdle;
  BrokerStats stats_;
};

}  // namespace tw2
