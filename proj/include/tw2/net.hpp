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

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tw2/wire.hpp"

namespace tw2 {

/// Monotonic host clock in ns; shared by every process on one host.
std::int64_t now_ns();

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    const int f = fd_;
    fd_ = -1;
    return f;
  }
  void close();
  /// Stops further reads and writes without releasing the descriptor, so a
  /// thread blocked in poll() on it wakes up.
  void shutdown();

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  /// Binds host:port; port 0 picks a free port. Throws std::system_error.
  TcpListener(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  /// Waits up to `timeout` for a connection.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() { sock_.shutdown(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// Connects with TCP_NODELAY set; throws std::system_error or TimeoutError.
Socket connect_tcp(const std::string& host, std::uint16_t port,
                   std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// Reads exactly out.size() bytes. Returns false on timeout before the first
/// byte; throws ProtocolError on EOF or a stall mid-buffer.
bool read_exact(const Socket& s, std::span<std::uint8_t> out, std::chrono::milliseconds timeout);
void write_all(const Socket& s, std::span<const std::uint8_t> bytes);

/// One framed message, or nullopt on timeout. EOF throws ProtocolError.
std::optional<Message> read_message(const Socket& s, std::chrono::milliseconds timeout);
void write_message(const Socket& s, const Message& m);

/// Port from an environment variable, or `fallback`.
std::uint16_t port_from_env(const char* name, std::uint16_t fallback);

}  // namespace tw2
