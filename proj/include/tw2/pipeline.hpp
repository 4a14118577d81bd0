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
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tw2/bus.hpp"
#include "tw2/command.hpp"
#include "tw2/sim.hpp"

namespace tw2 {

/// Yields human frames in real time. next() blocks until the next frame is
/// due and returns nullopt once the source is exhausted or closed.
class PoseSource {
 public:
  virtual ~PoseSource() = default;
  virtual std::optional<HumanPoseFrame> next() = 0;
  /// Unblocks next(); safe from another thread.
  virtual void close() = 0;
};

/// Plays recorded or generated frames at `rate_hz`, restamped with the host
/// clock at their release instant.
class FramePlayer : public PoseSource {
 public:
  FramePlayer(std::vector<HumanPoseFrame> frames, double rate_hz);
  std::optional<HumanPoseFrame> next() override;
  void close() override;

 private:
  std::vector<HumanPoseFrame> frames_;
  std::chrono::nanoseconds period_;
  std::size_t index_ = 0;
  std::chrono::steady_clock::time_point next_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool closed_ = false;
};

/// Frames published as POSE on the bus by another process.
class BusPoseSource : public PoseSource {
 public:
  explicit BusPoseSource(ClientOptions options);
  std::optional<HumanPoseFrame> next() override;
  void close() override { closed_ = true; }

 private:
  std::unique_ptr<BusClient> bus_;
  std::atomic<bool> closed_{false};
};

struct TeleopOptions {
  ClientOptions bus;
  double cmd_hz = 50.0;
  double interp_duration_s = 1.0;
  bool auto_start = true;  // request start once connected
};

struct TeleopStats {
  std::uint64_t poses = 0;
  std::uint64_t commands = 0;
  std::uint64_t retarget_degraded = 0;
  std::uint64_t rejected = 0;  // frames the retargeter could not use
  double retarget_max_ms = 0.0;
  Mode mode = Mode::kIdle;
  bool source_exhausted = false;
};

/// Retargeting session: pose source -> retarget -> command derivation on one
/// thread; session gating and CMD publishing at cmd_hz on another. Follows
/// the broker's CTRL acknowledgements for mode changes.
class TeleopNode {
 public:
  TeleopNode(const RobotModel& model, TeleopOptions options, std::unique_ptr<PoseSource> source);
  ~TeleopNode();
  TeleopNode(const TeleopNode&) = delete;
  TeleopNode& operator=(const TeleopNode&) = delete;

  /// Sends a CTRL request through the broker.
  void request(CtrlCode code);
  /// Ends the session: requests estop (or stop), publishes the zero-velocity
  /// hold command and joins the threads.
  void shutdown(bool estop);
  bool source_exhausted() const { return exhausted_.load(); }
  TeleopStats stats() const;

 private:
  void pose_loop();
  void cmd_loop();
  void on_ctrl(const Message& m);
  void publish_hold();

  const RobotModel& model_;
  Layout layout_;
  TeleopOptions options_;
  std::unique_ptr<PoseSource> source_;
  std::unique_ptr<BusClient> bus_;
  SessionController controller_;
  mutable std::mutex mu_;
  std::optional<CommandVector> live_;
  TeleopStats stats_;
  bool hold_sent_ = false;
  std::atomic<bool> running_{true};
  std::atomic<bool> exhausted_{false};
  std::thread pose_thread_;
  std::thread cmd_thread_;
};

struct SimNodeOptions {
  ClientOptions bus;
  double rate_hz = 50.0;
  SimConfig sim;
  double alpha = 1.0;
};

struct SimNodeStats {
  std::uint64_t steps = 0;
  std::uint64_t commands = 0;
  std::uint64_t missed_commands = 0;  // CMD seq gaps seen by this subscriber
  double mean_r_track = 0.0;
  double min_r_track = 1.0;
};

/// Tracker simulator on the bus: applies the latest CMD each tick and
/// publishes STATE stamped with the origin of the applied command.
class SimNode {
 public:
  SimNode(const RobotModel& model, SimNodeOptions options);
  ~SimNode();
  SimNode(const SimNode&) = delete;
  SimNode& operator=(const SimNode&) = delete;
  void stop();
  SimNodeStats stats() const;

 private:
  void run();

  const RobotModel& model_;
  Layout layout_;
  SimNodeOptions options_;
  std::unique_ptr<BusClient> bus_;
  mutable std::mutex mu_;
  SimNodeStats stats_;
  double sum_r_ = 0.0;
  std::atomic<bool> running_{true};
  std::thread thread_;
};

struct DelayReport {
  std::size_t samples = 0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  std::uint64_t missed_states = 0;
  std::uint64_t missed_commands = 0;
};

/// Pose-to-state delay: host time at which the first STATE reflecting a new
/// command origin arrives, minus that origin.
class DelayMonitor {
 public:
  explicit DelayMonitor(ClientOptions options);
  ~DelayMonitor();
  DelayMonitor(const DelayMonitor&) = delete;
  DelayMonitor& operator=(const DelayMonitor&) = delete;
  void stop();
  DelayReport report() const;
  std::uint64_t client_dropped() const { return bus_->dropped(); }

 private:
  void run();

  std::unique_ptr<BusClient> bus_;
  mutable std::mutex mu_;
  std::vector<double> delays_ms_;
  std::int64_t last_origin_ = 0;
  std::uint32_t last_seq_[2] = {0, 0};
  std::uint64_t missed_[2] = {0, 0};
  std::atomic<bool> running_{true};
  std::thread thread_;
};

enum class PoseSourceKind { kSyntheticWalk, kPoseFile, kBusTopic };

PoseSourceKind parse_pose_source(std::string_view name);
std::string_view pose_source_name(PoseSourceKind kind);

struct PipelineConfig {
  std::filesystem::path model_path = demo_model_path();
  PoseSourceKind source = PoseSourceKind::kSyntheticWalk;
  std::filesystem::path pose_file;
  std::uint64_t seed = 7;
  double duration_s = 60.0;  // run limit; 0 runs until the source ends
  double pose_hz = 100.0;
  double cmd_hz = 50.0;
  double sim_hz = 50.0;
  double record_hz = 30.0;
  double interp_duration_s = 1.0;
  std::string host = "127.0.0.1";
  std::uint16_t bus_port = default_bus_port();
  bool start_broker = true;
  bool start_sim = true;
  std::filesystem::path record_path;  // empty: no recording
  SimConfig sim;

  /// Throws ConfigError on a rate below 1 Hz or a missing referenced file.
  void validate() const;
  /// Keys mirror the field names; unknown keys are rejected.
  static PipelineConfig from_yaml(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct PipelineReport {
  double wall_s = 0.0;
  TeleopStats teleop;
  SimNodeStats sim;
  DelayReport delay;
  std::uint64_t broker_dropped = 0;
  std::uint64_t client_dropped = 0;
  std::size_t records = 0;
  bool interrupted = false;

  /// Messages lost anywhere between publisher and subscriber.
  std::uint64_t dropped_messages() const;
  nlohmann::json to_json() const;
};

/// Runs the whole loop until the duration elapses, the source is exhausted
/// or `cancel` is set. Cancellation takes the estop path.
PipelineReport run_teleop(const PipelineConfig& config, const std::atomic<bool>* cancel = nullptr);

}  // namespace tw2
