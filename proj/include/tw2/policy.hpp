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
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "tw2/bus.hpp"
#include "tw2/command.hpp"
#include "tw2/inference.hpp"

namespace tw2 {

inline constexpr std::size_t kExecuteSteps = 48;

struct ActionChunk {
  std::vector<std::vector<double>> commands;  // kChunkSteps flattened commands
  std::int64_t issued_at_ns = 0;
  std::uint64_t source_seq = 0;  // inference call id

  /// Throws ValidationError unless there are exactly kChunkSteps finite rows
  /// of length `dim`.
  void validate(std::size_t dim) const;
};

/// Fixed-capacity ring of the most recent normalized commands.
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t capacity, std::size_t dim);

  void push(std::vector<double> normalized);
  std::size_t size() const { return rows_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return rows_.size() == capacity_; }
  /// Exactly capacity rows, oldest first; a short buffer is padded at the
  /// front with copies of its oldest row. Throws when empty.
  std::vector<std::vector<double>> snapshot() const;

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::deque<std::vector<double>> rows_;
};

struct Emission {
  std::vector<double> command;
  std::uint64_t chunk_seq = 0;
  std::size_t step = 0;   // 1-based index in the chunk; 0 while holding
  bool starved = false;   // chunk exhausted with nothing to switch to
  bool fallback = false;  // holding because inference failed
};

/// Tick-driven chunk executor. Steps 1..execute of the current chunk are
/// emitted one per tick; after that the newest mailbox chunk takes over at
/// the next tick boundary. A late chunk lets execution run on into the spare
/// steps; once those are gone the last command is held and flagged.
class ChunkScheduler {
 public:
  explicit ChunkScheduler(std::size_t execute_steps = kExecuteSteps);

  /// Single-slot mailbox: a newer chunk replaces an unconsumed older one.
  void offer(ActionChunk chunk);
  /// Inference failed: hold the last command from the next tick until a
  /// chunk arrives.
  void engage_fallback();
  /// Output for one tick; nullopt before the first chunk.
  std::optional<Emission> tick();

  bool has_chunk() const { return current_.has_value(); }
  std::size_t executed_in_current() const { return step_; }

 private:
  bool switch_to_mailbox();

  std::size_t execute_;
  std::optional<ActionChunk> current_;
  std::optional<ActionChunk> mailbox_;
  std::size_t step_ = 0;
  std::uint64_t last_seq_ = 0;
  std::optional<std::vector<double>> last_;
  bool fallback_ = false;
};

struct PolicyRunnerConfig {
  std::string endpoint_host = "127.0.0.1";
  std::uint16_t endpoint_port = 7449;
  double inference_hz = 20.0;
  double exec_hz = 30.0;
  std::size_t execute_steps = kExecuteSteps;
  std::size_t history = 16;
  std::chrono::milliseconds timeout{200};
  std::optional<NormalizationStats> stats;
  std::vector<double> initial_command;  // seeds the history
  int realtime_priority = 50;  // SCHED_FIFO for the tick thread; 0 disables
};

struct RunnerStats {
  std::uint64_t emissions = 0;
  std::uint64_t starved_ticks = 0;
  std::uint64_t fallback_ticks = 0;
  std::uint64_t inference_ok = 0;
  std::uint64_t inference_failed = 0;
  std::int64_t first_emit_ns = 0;
  std::int64_t last_emit_ns = 0;
  double min_interval_ms = 0.0;
  double max_interval_ms = 0.0;
  std::vector<double> intervals_ms;
  std::vector<std::size_t> executed_per_chunk;  // completed chunks only
  std::int64_t first_inference_ns = 0;
  std::int64_t last_inference_ns = 0;

  double emit_rate_hz() const;
  double inference_rate_hz() const;
};

/// Runs the inference requester and the tick scheduler as two threads that
/// share only the scheduler's mailbox. Emitted commands go to `sink`.
class PolicyRunner {
 public:
  using Sink = std::function<void(const Emission&)>;

  PolicyRunner(const Layout& layout, PolicyRunnerConfig config, Sink sink);
  ~PolicyRunner();
  PolicyRunner(const PolicyRunner&) = delete;
  PolicyRunner& operator=(const PolicyRunner&) = delete;

  /// Latest camera frame forwarded with each request.
  void set_image(std::vector<std::uint8_t> jpeg);
  void stop();
  RunnerStats stats() const;

 private:
  void infer_loop();
  void tick_loop();

  Layout layout_;
  PolicyRunnerConfig config_;
  Sink sink_;
  InferenceClient client_;

  mutable std::mutex mu_;
  ChunkScheduler scheduler_;
  HistoryBuffer history_;
  std::vector<std::uint8_t> image_;
  RunnerStats stats_;
  std::uint64_t chunk_in_flight_ = 0;
  std::size_t chunk_steps_ = 0;

  std::atomic<bool> running_{true};
  std::thread infer_;
  std::thread ticker_;
};

/// Sink that publishes each emission as CMD on the bus.
PolicyRunner::Sink bus_sink(BusClient& bus);

}  // namespace tw2
