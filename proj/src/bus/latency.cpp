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


#include "tw2/latency.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tw2/payloads.hpp"

namespace tw2 {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * values.size()));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

LatencyReport measure_latency(BusClient& client, std::size_t count,
                              std::chrono::milliseconds interval,
                              std::chrono::milliseconds timeout) {
  const std::uint64_t me = std::random_device{}() ^ static_cast<std::uint64_t>(now_ns());
  LatencyReport report;
  auto next = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < count; ++i) {
    std::this_thread::sleep_until(next);
    next += interval;
    const LatencyProbe probe{me, i, now_ns()};
    client.publish(MsgType::kLatency, encode_probe(probe),
                   static_cast<std::uint64_t>(probe.sent_ns));
    ++report.sent;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto left = std::chrono::ceil<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw TimeoutError("no LATENCY echo within " + std::to_string(timeout.count()) + " ms");
      }
      auto m = client.receive(left);
      if (!m) {
        if (!client.connected()) throw ProtocolError("bus disconnected: " + client.error());
        continue;
      }
      if (m->type != MsgType::kLatency || !(m->flags & kFlagReply)) continue;
      const LatencyProbe echo = decode_probe(*m);
      if (echo.requester != me || echo.probe != i) continue;
      report.rtt_ms.push_back(static_cast<double>(now_ns() - echo.sent_ns) * 1e-6);
      break;
    }
  }
  report.p50_ms = percentile(report.rtt_ms, 50);
  report.p99_ms = percentile(report.rtt_ms, 99);
  report.max_ms = percentile(report.rtt_ms, 100);
  return report;
}

EchoPeer::EchoPeer(ClientOptions options) {
  options.subscribe = {MsgType::kLatency};
  client_ = std::make_unique<BusClient>(std::move(options));
  thread_ = std::thread([this] {
    while (running_ && client_->connected()) {
      auto m = client_->receive(std::chrono::milliseconds(100));
      if (!m || m->type != MsgType::kLatency || (m->flags & kFlagReply)) continue;
      try {
        client_->publish(MsgType::kLatency, m->payload, static_cast<std::uint64_t>(now_ns()),
                         kFlagReply);
        ++echoed_;
      } catch (const ProtocolError&) {
        break;
      }
    }
  });
}

EchoPeer::~EchoPeer() { stop(); }

void EchoPeer::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
  if (client_) client_->close();
}

}  // namespace tw2
