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
#include <span>
#include <vector>

#include "tw2/command.hpp"
#include "tw2/model.hpp"

namespace tw2 {

/// Idealized stand-in for the learned low-level tracker.
struct SimConfig {
  double inertia = 0.1;  // kg m^2 per joint
  double kp = 100.0;     // N m / rad
  double kd = 0.0;       // N m s / rad; 0 selects critical damping 2 sqrt(kp I)
  double substep_hz = 500.0;
  double attitude_time_constant = 0.1;  // s, z/roll/pitch low-pass
  // Offsets the PD target by (kd/kp) * dq_ref estimated from consecutive
  // commands, which removes the steady lag of a pure PD on moving targets.
  bool velocity_feedforward = true;
};

struct SimState {
  double time = 0.0;  // s
  // Actuated joints in layout order: body, neck yaw/pitch, left hand, right hand.
  std::vector<double> q;
  std::vector<double> dq;
  std::vector<double> kp;
  std::vector<double> kd;
  std::vector<double> inertia;
  std::vector<double> lower;
  std::vector<double> upper;

  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  Vec3 angular_velocity = Vec3::Zero();  // body frame, rad/s
  double vx = 0.0;  // last applied heading-frame velocity
  double vy = 0.0;
  double yaw_rate = 0.0;

  double substep_hz = 500.0;
  double attitude_time_constant = 0.1;
  bool velocity_feedforward = true;
  std::vector<double> last_target;  // previous command targets, for feedforward
  std::int64_t last_target_ns = 0;

  LinkPose root() const { return {from_rpy({roll, pitch, yaw}), position}; }
  bool operator==(const SimState&) const = default;
};

/// Robot at the clamped zero configuration, standing at `root`.
SimState make_sim_state(const RobotModel& model, const SimConfig& config = {},
                        const LinkPose& root = {});

/// tau = K_P (q_tgt - q) - K_D dq, elementwise.
std::vector<double> pd_torque(const SimState& state, std::span<const double> q_tgt);

/// Advances the plant by dt in (0, 0.1] s with semi-implicit Euler substeps.
/// Pure function of its arguments.
SimState step(const SimState& state, const CommandVector& cmd, double dt);

struct TrackingMetric {
  double r_track = 1.0;
  double alpha = 1.0;
  double error_norm = 0.0;
};

/// r = exp(-alpha * |cmd - achieved|) over flattened vectors of one layout.
TrackingMetric tracking_metric(std::span<const double> cmd, std::span<const double> achieved,
                               double alpha = 1.0);

/// The command-space vector the plant actually realizes: applied root
/// velocities, current z/roll/pitch and joint positions.
CommandVector achieved_command(const Layout& layout, const SimState& state,
                               std::int64_t timestamp_ns = 0);

ProprioState proprio_state(const SimState& state, std::int64_t timestamp_ns);

}  // namespace tw2
