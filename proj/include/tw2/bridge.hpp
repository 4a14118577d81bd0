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
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tw2/bus.hpp"

namespace tw2 {

struct BridgeConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultBridgePort;  // 0 picks a free port
  ClientOptions bus;
  double view_hz = 10.0;  // STATE/CMD forwarding cap per topic
};

/// Websocket endpoint for the operator console. Forwards bus STATE and CMD
/// as JSON at a capped rate, forwards CTRL verdicts and broadcasts
/// immediately, and turns console messages into bus CTRL events:
///   {"type":"ctrl","event":"pause"}   {"type":"mark","kind":"failure"}
/// Every console request is answered with
///   {"type":"ack","event":...,"ok":bool,"mode":...}.
class Bridge {
 public:
  explicit Bridge(BridgeConfig config);
  ~Bridge();
  Bridge(const Bridge&) = delete;
  Bridge& operator=(const Bridge&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  std::size_t clients() const;
  Mode mode() const;
  void stop();

 private:
  struct Console;
  void accept_loop();
  void serve(const std::shared_ptr<Console>& c);
  void bus_loop();
  void handle_console(const std::string& text, Console& c);
  void send(Console& c, const nlohmann::json& j);
  void broadcast(const nlohmann::json& j);
  nlohmann::json hello() const;

  BridgeConfig config_;
  TcpListener listener_;
  std::unique_ptr<BusClient> bus_;
  std::atomic<bool> running_{true};

  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Console>> consoles_;
  Mode mode_ = Mode::kIdle;
  nlohmann::json layout_;

  std::thread acceptor_;
  std::thread pump_;
};

}  // namespace tw2
