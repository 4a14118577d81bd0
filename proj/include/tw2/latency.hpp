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
#include <thread>
#include <vector>

#include "tw2/bus.hpp"

namespace tw2 {

struct LatencyReport {
  std::vector<double> rtt_ms;  // one entry per answered probe, in send order
  std::size_t sent = 0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  /// One-way delay is approximated as half the round trip.
  double one_way_p99_ms() const { return 0.5 * p99_ms; }
};

/// Nearest-rank percentile, p in [0, 100]. Empty input gives 0.
double percentile(std::vector<double> values, double p);

/// Sends `count` LATENCY probes through the bus spaced by `interval` and
/// waits for each echo. Round trips use only this host's clock. Throws
/// TimeoutError when a probe is not echoed within `timeout`.
/// The client must subscribe to LATENCY.
LatencyReport measure_latency(BusClient& client, std::size_t count,
                              std::chrono::milliseconds interval,
                              std::chrono::milliseconds timeout = std::chrono::seconds(1));

/// Bus peer that answers every LATENCY probe with a reply-flagged copy.
class EchoPeer {
 public:
  explicit EchoPeer(ClientOptions options);
  ~EchoPeer();
  EchoPeer(const EchoPeer&) = delete;
  EchoPeer& operator=(const EchoPeer&) = delete;

  std::uint64_t echoed() const { return echoed_.load(); }
  void stop();

 private:
  std::unique_ptr<BusClient> client_;
  std::atomic<bool> running_{true};
  std::atomic<std::uint64_t> echoed_{0};
  std::thread thread_;
};

}  // namespace tw2
