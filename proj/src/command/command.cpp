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


#include "tw2/command.hpp"

#include <cmath>

namespace tw2 {
namespace {

void expect_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(want) +
                         " values, got " + std::to_string(got));
  }
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void append(std::vector<double>& out, std::span<const double> v) {
  out.insert(out.end(), v.begin(), v.end());
}

std::vector<double> take(std::span<const double> flat, std::size_t& pos, std::size_t n) {
  std::vector<double> v(flat.begin() + pos, flat.begin() + pos + n);
  pos += n;
  return v;
}

}  // namespace

Layout Layout::for_model(const RobotModel& model) {
  Layout l;
  l.body = model.joint_names();
  l.left_hand = model.left_hand.joints;
  l.right_hand = model.right_hand.joints;
  return l;
}

std::vector<std::string> Layout::command_names() const {
  std::vector<std::string> n{"vx", "vy", "z", "roll", "pitch", "yaw_rate"};
  n.insert(n.end(), body.begin(), body.end());
  n.push_back("neck_yaw");
  n.push_back("neck_pitch");
  n.insert(n.end(), left_hand.begin(), left_hand.end());
  n.insert(n.end(), right_hand.begin(), right_hand.end());
  return n;
}

std::vector<std::string> Layout::state_names() const {
  std::vector<std::string> n{"qw", "qx", "qy", "qz", "wx", "wy", "wz"};
  auto joints = command_names();
  joints.erase(joints.begin(), joints.begin() + 6);
  for (const auto& j : joints) n.push_back("q." + j);
  for (const auto& j : joints) n.push_back("dq." + j);
  return n;
}

nlohmann::json Layout::to_json() const {
  return {{"version", version},
          {"body", body},
          {"left_hand", left_hand},
          {"right_hand", right_hand},
          {"command_dim", command_dim()},
          {"state_dim", state_dim()}};
}

Layout Layout::from_json(const nlohmann::json& j) {
  try {
    Layout l;
    l.version = j.at("version").get<int>();
    if (l.version != kLayoutVersion) {
      throw ProtocolError("unsupported layout version " + std::to_string(l.version));
    }
    l.body = j.at("body").get<std::vector<std::string>>();
    l.left_hand = j.at("left_hand").get<std::vector<std::string>>();
    l.right_hand = j.at("right_hand").get<std::vector<std::string>>();
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad layout descriptor: ") + e.what());
  }
}

std::vector<double> flatten(const Layout& layout, const CommandVector& cmd) {
  expect_size(cmd.q_ref.size(), layout.body.size(), "command body targets");
  expect_size(cmd.left_hand.size(), layout.left_hand.size(), "command left hand");
  expect_size(cmd.right_hand.size(), layout.right_hand.size(), "command right hand");
  std::vector<double> out{cmd.vx, cmd.vy, cmd.z, cmd.roll, cmd.pitch, cmd.yaw_rate};
  out.reserve(layout.command_dim());
  append(out, cmd.q_ref);
  out.push_back(cmd.neck_yaw);
  out.push_back(cmd.neck_pitch);
  append(out, cmd.left_hand);
  append(out, cmd.right_hand);
  return out;
}

CommandVector unflatten_command(const Layout& layout, std::span<const double> flat,
                                std::int64_t timestamp_ns) {
  expect_size(flat.size(), layout.command_dim(), "command vector");
  CommandVector c;
  c.timestamp_ns = timestamp_ns;
  c.vx = flat[0];
  c.vy = flat[1];
  c.z = flat[2];
  c.roll = flat[3];
  c.pitch = flat[4];
  c.yaw_rate = flat[5];
  std::size_t pos = 6;
  c.q_ref = take(flat, pos, layout.body.size());
  c.neck_yaw = flat[pos++];
  c.neck_pitch = flat[pos++];
  c.left_hand = take(flat, pos, layout.left_hand.size());
  c.right_hand = take(flat, pos, layout.right_hand.size());
  return c;
}

std::vector<double> flatten(const Layout& layout, const ProprioState& state) {
  expect_size(state.q.size(), layout.actuated_dim(), "state q");
  expect_size(state.dq.size(), layout.actuated_dim(), "state dq");
  const auto& o = state.root_orientation;
  const auto& w = state.root_angular_velocity;
  std::vector<double> out{o.w(), o.x(), o.y(), o.z(), w.x(), w.y(), w.z()};
  out.reserve(layout.state_dim());
  append(out, state.q);
  append(out, state.dq);
  return out;
}

ProprioState unflatten_state(const Layout& layout, std::span<const double> flat,
                             std::int64_t timestamp_ns) {
  expect_size(flat.size(), layout.state_dim(), "state vector");
  ProprioState s;
  s.timestamp_ns = timestamp_ns;
  s.root_orientation = Quat(flat[0], flat[1], flat[2], flat[3]);
  s.root_angular_velocity = Vec3(flat[4], flat[5], flat[6]);
  std::size_t pos = 7;
  s.q = take(flat, pos, layout.actuated_dim());
  s.dq = take(flat, pos, layout.actuated_dim());
  return s;
}

std::vector<double> actuated_targets(const CommandVector& cmd) {
  std::vector<double> out(cmd.q_ref);
  out.push_back(cmd.neck_yaw);
  out.push_back(cmd.neck_pitch);
  append(out, cmd.left_hand);
  append(out, cmd.right_hand);
  return out;
}

RobotPoseSample RobotPoseSample::from_result(const RetargetResult& r, std::int64_t timestamp_ns) {
  return {timestamp_ns, r.root, r.q, r.neck, r.left_hand, r.right_hand};
}

CommandVector derive_command(const RobotPoseSample& prev, const RobotPoseSample& curr,
                             double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  const bool finite = prev.root.rotation.allFinite() && prev.root.position.allFinite() &&
                      curr.root.rotation.allFinite() && curr.root.position.allFinite() &&
                      all_finite(curr.q) && all_finite(curr.left_hand) &&
                      all_finite(curr.right_hand) && std::isfinite(curr.neck.yaw) &&
                      std::isfinite(curr.neck.pitch);
  if (!finite) throw ValidationError("non-finite pose in command derivation");

  const double heading = heading_of(prev.root.rotation);
  const Vec3 d = curr.root.position - prev.root.position;
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const Rpy rpy = to_rpy(curr.root.rotation);

  CommandVector cmd;
  cmd.timestamp_ns = curr.timestamp_ns;
  cmd.vx = (c * d.x() + s * d.y()) / dt;
  cmd.vy = (-s * d.x() + c * d.y()) / dt;
  cmd.yaw_rate = wrap_angle(heading_of(curr.root.rotation) - heading) / dt;
  cmd.z = curr.root.position.z();
  cmd.roll = rpy.roll;
  cmd.pitch = rpy.pitch;
  cmd.q_ref = curr.q;
  cmd.neck_yaw = curr.neck.yaw;
  cmd.neck_pitch = curr.neck.pitch;
  cmd.left_hand = curr.left_hand;
  cmd.right_hand = curr.right_hand;
  return cmd;
}

CommandDeriver::CommandDeriver(double beta) : beta_(beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("smoothing must be in [0, 1)");
}

CommandVector CommandDeriver::push(const RobotPoseSample& sample) {
  CommandVector cmd;
  if (!prev_) {
    cmd = derive_command(sample, sample, 1.0);
  } else {
    const double dt = static_cast<double>(sample.timestamp_ns - prev_->timestamp_ns) * 1e-9;
    cmd = derive_command(*prev_, sample, dt);
    vx_ = (1.0 - beta_) * cmd.vx + beta_ * vx_;
    vy_ = (1.0 - beta_) * cmd.vy + beta_ * vy_;
    yaw_rate_ = (1.0 - beta_) * cmd.yaw_rate + beta_ * yaw_rate_;
  }
  cmd.vx = vx_;
  cmd.vy = vy_;
  cmd.yaw_rate = yaw_rate_;
  prev_ = sample;
  return cmd;
}

void CommandDeriver::reset() {
  prev_.reset();
  vx_ = vy_ = yaw_rate_ = 0.0;
}

void NormalizationStats::validate() const {
  if (offset.size() != scale.size()) throw ValidationError("stats offset/scale size mismatch");
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (!(scale[i] > 0.0) || !std::isfinite(scale[i]) || !std::isfinite(offset[i])) {
      throw ValidationError("stats dimension " + std::to_string(i) + " has non-positive scale");
    }
  }
}

nlohmann::json NormalizationStats::to_json() const {
  return {{"offset", offset}, {"scale", scale}};
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  NormalizationStats s;
  s.offset = j.at("offset").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  s.validate();
  return s;
}

NormalizationStats compute_stats(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw std::invalid_argument("cannot compute stats of zero rows");
  const std::size_t dim = rows.front().size();
  const double n = static_cast<double>(rows.size());
  NormalizationStats s;
  s.offset.assign(dim, 0.0);
  s.scale.assign(dim, 0.0);
  for (const auto& r : rows) {
    expect_size(r.size(), dim, "stats row");
    for (std::size_t i = 0; i < dim; ++i) s.offset[i] += r[i];
  }
  for (double& m : s.offset) m /= n;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = r[i] - s.offset[i];
      s.scale[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double sd = std::sqrt(s.scale[i] / n);
    s.scale[i] = sd > 1e-12 * std::max(1.0, std::abs(s.offset[i])) ? sd : 1.0;
  }
  return s;
}

std::vector<double> normalize(std::span<const double> flat, const NormalizationStats& stats) {
  stats.validate();
  expect_size(flat.size(), stats.size(), "normalize");
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (flat[i] - stats.offset[i]) / stats.scale[i];
  return out;
}

std::vector<double> denormalize(std::span<const double> flat, const NormalizationStats& stats) {
  stats.validate();
  expect_size(flat.size(), stats.size(), "denormalize");
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = flat[i] * stats.scale[i] + stats.offset[i];
  return out;
}

ProprioNoise::ProprioNoise(NormalizationStats stats, double fraction, std::uint64_t seed)
    : stats_(std::move(stats)), fraction_(fraction), rng_(seed) {
  if (!(fraction >= 0.0)) throw std::invalid_argument("noise fraction must be >= 0");
  stats_.validate();
}

std::vector<double> ProprioNoise::apply(std::span<const double> flat) {
  expect_size(flat.size(), stats_.size(), "noise input");
  std::vector<double> out(flat.begin(), flat.end());
  if (fraction_ == 0.0) return out;
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += fraction_ * stats_.scale[i] * n(rng_);
  return out;
}

std::vector<double> add_proprio_noise(std::span<const double> flat,
                                      const NormalizationStats* stats, double fraction,
                                      std::uint64_t seed) {
  if (!stats) throw std::invalid_argument("proprio noise needs normalization stats");
  return ProprioNoise(*stats, fraction, seed).apply(flat);
}

}  // namespace tw2
