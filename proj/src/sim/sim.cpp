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


#include "tw2/sim.hpp"

#include <cmath>

namespace tw2 {
namespace {

void append_limits(SimState& s, std::span<const double> lo, std::span<const double> hi) {
  s.lower.insert(s.lower.end(), lo.begin(), lo.end());
  s.upper.insert(s.upper.end(), hi.begin(), hi.end());
}

}  // namespace

SimState make_sim_state(const RobotModel& model, const SimConfig& config, const LinkPose& root) {
  if (!(config.inertia > 0.0) || !(config.kp > 0.0) || config.kd < 0.0) {
    throw std::invalid_argument("sim gains and inertia must be positive");
  }
  if (!(config.substep_hz > 0.0) || !(config.attitude_time_constant > 0.0)) {
    throw std::invalid_argument("sim rates must be positive");
  }
  SimState s;
  for (const auto& j : model.joints) {
    s.lower.push_back(j.lower);
    s.upper.push_back(j.upper);
  }
  const std::vector<double> neck_lo{model.neck.yaw_lower, model.neck.pitch_lower};
  const std::vector<double> neck_hi{model.neck.yaw_upper, model.neck.pitch_upper};
  append_limits(s, neck_lo, neck_hi);
  append_limits(s, model.left_hand.lower, model.left_hand.upper);
  append_limits(s, model.right_hand.lower, model.right_hand.upper);

  const std::size_t n = s.lower.size();
  const double kd = config.kd > 0.0 ? config.kd : 2.0 * std::sqrt(config.kp * config.inertia);
  s.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.q[i] = std::clamp(0.0, s.lower[i], s.upper[i]);
  s.dq.assign(n, 0.0);
  s.kp.assign(n, config.kp);
  s.kd.assign(n, kd);
  s.inertia.assign(n, config.inertia);

  const Rpy rpy = to_rpy(root.rotation);
  s.position = root.position;
  s.yaw = rpy.yaw;
  s.roll = rpy.roll;
  s.pitch = rpy.pitch;
  s.substep_hz = config.substep_hz;
  s.attitude_time_constant = config.attitude_time_constant;
  s.velocity_feedforward = config.velocity_feedforward;
  return s;
}

std::vector<double> pd_torque(const SimState& state, std::span<const double> q_tgt) {
  const std::size_t n = state.q.size();
  if (q_tgt.size() != n || state.dq.size() != n || state.kp.size() != n || state.kd.size() != n) {
    throw DimensionError("pd_torque: target has " + std::to_string(q_tgt.size()) +
                         " joints, state has " + std::to_string(n));
  }
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) {
    tau[i] = state.kp[i] * (q_tgt[i] - state.q[i]) - state.kd[i] * state.dq[i];
  }
  return tau;
}

SimState step(const SimState& state, const CommandVector& cmd, double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("sim dt must be in (0, 0.1]");
  const std::vector<double> target = actuated_targets(cmd);
  if (target.size() != state.q.size()) {
    throw DimensionError("command has " + std::to_string(target.size()) +
                         " joint targets, sim has " + std::to_string(state.q.size()));
  }

  SimState s = state;
  std::vector<double> q_tgt = target;
  if (s.velocity_feedforward && s.last_target.size() == target.size() &&
      cmd.timestamp_ns > s.last_target_ns) {
    const double span = static_cast<double>(cmd.timestamp_ns - s.last_target_ns) * 1e-9;
    for (std::size_t i = 0; i < q_tgt.size(); ++i) {
      q_tgt[i] += s.kd[i] / s.kp[i] * (target[i] - s.last_target[i]) / span;
    }
  }
  s.last_target = target;
  s.last_target_ns = cmd.timestamp_ns;

  const Mat3 r_before = s.root().rotation;
  const int substeps = std::max(1, static_cast<int>(std::ceil(dt * s.substep_hz - 1e-9)));
  const double h = dt / substeps;
  const double blend = 1.0 - std::exp(-h / s.attitude_time_constant);
  for (int k = 0; k < substeps; ++k) {
    const auto tau = pd_torque(s, q_tgt);
    for (std::size_t i = 0; i < s.q.size(); ++i) {
      s.dq[i] += h * tau[i] / s.inertia[i];
      s.q[i] += h * s.dq[i];
      if (s.q[i] < s.lower[i] || s.q[i] > s.upper[i]) {
        s.q[i] = std::clamp(s.q[i], s.lower[i], s.upper[i]);
        s.dq[i] = 0.0;
      }
    }
    const double c = std::cos(s.yaw);
    const double sn = std::sin(s.yaw);
    s.position.x() += (c * cmd.vx - sn * cmd.vy) * h;
    s.position.y() += (sn * cmd.vx + c * cmd.vy) * h;
    s.yaw = wrap_angle(s.yaw + cmd.yaw_rate * h);
    s.position.z() += blend * (cmd.z - s.position.z());
    s.roll += blend * (cmd.roll - s.roll);
    s.pitch += blend * (cmd.pitch - s.pitch);
  }
  s.vx = cmd.vx;
  s.vy = cmd.vy;
  s.yaw_rate = cmd.yaw_rate;
  s.angular_velocity = rotation_log(r_before.transpose() * s.root().rotation) / dt;
  s.time += dt;
  return s;
}

TrackingMetric tracking_metric(std::span<const double> cmd, std::span<const double> achieved,
                               double alpha) {
  if (cmd.size() != achieved.size()) throw DimensionError("tracking_metric: size mismatch");
  if (!(alpha > 0.0)) throw std::invalid_argument("tracking alpha must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < cmd.size(); ++i) {
    const double d = cmd[i] - achieved[i];
    sq += d * d;
  }
  TrackingMetric m;
  m.alpha = alpha;
  m.error_norm = std::sqrt(sq);
  m.r_track = std::exp(-alpha * m.error_norm);
  return m;
}

CommandVector achieved_command(const Layout& layout, const SimState& state,
                               std::int64_t timestamp_ns) {
  if (state.q.size() != layout.actuated_dim()) {
    throw DimensionError("sim state does not match the layout");
  }
  CommandVector c;
  c.timestamp_ns = timestamp_ns;
  c.vx = state.vx;
  c.vy = state.vy;
  c.z = state.position.z();
  c.roll = state.roll;
  c.pitch = state.pitch;
  c.yaw_rate = state.yaw_rate;
  auto it = state.q.begin();
  c.q_ref.assign(it, it + static_cast<std::ptrdiff_t>(layout.body.size()));
  it += static_cast<std::ptrdiff_t>(layout.body.size());
  c.neck_yaw = *it++;
  c.neck_pitch = *it++;
  c.left_hand.assign(it, it + static_cast<std::ptrdiff_t>(layout.left_hand.size()));
  it += static_cast<std::ptrdiff_t>(layout.left_hand.size());
  c.right_hand.assign(it, state.q.end());
  return c;
}

ProprioState proprio_state(const SimState& state, std::int64_t timestamp_ns) {
  ProprioState p;
  p.timestamp_ns = timestamp_ns;
  p.root_orientation = Quat(state.root().rotation).normalized();
  p.root_angular_velocity = state.angular_velocity;
  p.q = state.q;
  p.dq = state.dq;
  return p;
}

}  // namespace tw2
