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

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tw2/model.hpp"
#include "tw2/retarget.hpp"

namespace tw2 {

inline constexpr int kLayoutVersion = 1;

/// Names and order of every flattened dimension. Shared by the bus handshake
/// and the episode header so both ends agree on vector contents.
///
/// Command: [vx, vy, z, roll, pitch, yaw_rate, body..., neck_yaw, neck_pitch,
///           left_hand..., right_hand...]
/// State:   [qw, qx, qy, qz, wx, wy, wz, q(actuated)..., dq(actuated)...]
/// where actuated = body, neck, left hand, right hand.
struct Layout {
  int version = kLayoutVersion;
  std::vector<std::string> body;
  std::vector<std::string> left_hand;
  std::vector<std::string> right_hand;

  static Layout for_model(const RobotModel& model);

  std::size_t actuated_dim() const {
    return body.size() + 2 + left_hand.size() + right_hand.size();
  }
  std::size_t command_dim() const { return 6 + actuated_dim(); }
  std::size_t state_dim() const { return 7 + 2 * actuated_dim(); }

  std::vector<std::string> command_names() const;
  std::vector<std::string> state_names() const;

  nlohmann::json to_json() const;
  /// Throws ProtocolError on a missing field or an unsupported version.
  static Layout from_json(const nlohmann::json& j);

  bool operator==(const Layout&) const = default;
};

struct CommandVector {
  std::int64_t timestamp_ns = 0;
  double vx = 0.0;  // m/s, heading frame
  double vy = 0.0;
  double z = 0.0;  // m
  double roll = 0.0;
  double pitch = 0.0;
  double yaw_rate = 0.0;  // rad/s
  std::vector<double> q_ref;
  double neck_yaw = 0.0;
  double neck_pitch = 0.0;
  std::vector<double> left_hand;
  std::vector<double> right_hand;

  bool operator==(const CommandVector&) const = default;
};

struct ProprioState {
  std::int64_t timestamp_ns = 0;
  Quat root_orientation = Quat::Identity();
  Vec3 root_angular_velocity = Vec3::Zero();
  std::vector<double> q;  // actuated order: body, neck, left hand, right hand
  std::vector<double> dq;

  bool operator==(const ProprioState& o) const {
    return timestamp_ns == o.timestamp_ns && root_orientation.coeffs() == o.root_orientation.coeffs() &&
           root_angular_velocity == o.root_angular_velocity && q == o.q && dq == o.dq;
  }
};

std::vector<double> flatten(const Layout& layout, const CommandVector& cmd);
CommandVector unflatten_command(const Layout& layout, std::span<const double> flat,
                                std::int64_t timestamp_ns = 0);
std::vector<double> flatten(const Layout& layout, const ProprioState& state);
ProprioState unflatten_state(const Layout& layout, std::span<const double> flat,
                             std::int64_t timestamp_ns = 0);

/// Joint targets of a command in actuated order (body, neck, hands).
std::vector<double> actuated_targets(const CommandVector& cmd);

/// Retargeted robot pose at one instant; input to command derivation.
struct RobotPoseSample {
  std::int64_t timestamp_ns = 0;
  LinkPose root;
  std::vector<double> q;
  NeckAngles neck;
  std::vector<double> left_hand;
  std::vector<double> right_hand;

  static RobotPoseSample from_result(const RetargetResult& r, std::int64_t timestamp_ns);
};

/// Relative root velocities in the heading frame of `prev`, absolute
/// z/roll/pitch and joint targets from `curr`. Throws on dt <= 0 or
/// non-finite input.
CommandVector derive_command(const RobotPoseSample& prev, const RobotPoseSample& curr,
                             double dt);

/// Streaming command derivation with exponential velocity smoothing:
/// v = (1 - beta) * raw + beta * v_prev. The first sample yields zero velocity.
class CommandDeriver {
 public:
  explicit CommandDeriver(double beta = 0.2);

  CommandVector push(const RobotPoseSample& sample);
  void reset();

 private:
  double beta_;
  std::optional<RobotPoseSample> prev_;
  double vx_ = 0.0, vy_ = 0.0, yaw_rate_ = 0.0;
};

struct NormalizationStats {
  std::vector<double> offset;
  std::vector<double> scale;

  std::size_t size() const { return offset.size(); }
  /// Throws ValidationError unless sizes agree and every scale is finite and > 0.
  void validate() const;

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
  bool operator==(const NormalizationStats&) const = default;
};

/// Per-dimension mean and population standard deviation. Dimensions with
/// zero spread get scale 1 so they pass through shifted only.
NormalizationStats compute_stats(std::span<const std::vector<double>> rows);

std::vector<double> normalize(std::span<const double> flat, const NormalizationStats& stats);
std::vector<double> denormalize(std::span<const double> flat, const NormalizationStats& stats);

/// Seeded Gaussian noise with per-dimension stdev fraction * scale.
class ProprioNoise {
 public:
  ProprioNoise(NormalizationStats stats, double fraction, std::uint64_t seed);
  std::vector<double> apply(std::span<const double> flat);

 private:
  NormalizationStats stats_;
  double fraction_;
  std::mt19937_64 rng_;
};

std::vector<double> add_proprio_noise(std::span<const double> flat,
                                      const NormalizationStats* stats, double fraction,
                                      std::uint64_t seed);

}  // namespace tw2
