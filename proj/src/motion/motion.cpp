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


#include "tw2/motion.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "tw2/binary_io.hpp"

namespace tw2 {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr char kPoseMagic[4] = {'T', 'W', '2', 'P'};
constexpr std::uint32_t kPoseVersion = 1;
const Vec3 kHeadOffset{0.0, 0.0, 0.42};

class Pose {
 public:
  explicit Pose(const RobotModel& model) : model_(model), q_(model.dof(), 0.0) {
    clamp_to_limits(model_, q_);
  }
  void set(std::string_view joint, double value) {
    const int i = model_.joint_index(joint);
    if (i < 0) return;
    q_[i] = std::clamp(value, model_.joints[i].lower, model_.joints[i].upper);
  }
  // Same value on both sides, mirrored for roll/yaw-like joints by the caller.
  void set_pair(std::string_view suffix, double left, double right) {
    set("left_" + std::string(suffix), left);
    set("right_" + std::string(suffix), right);
  }
  const std::vector<double>& q() const { return q_; }

 private:
  const RobotModel& model_;
  std::vector<double> q_;
};

struct Sample {
  std::vector<double> q;
  LinkPose root;
  NeckAngles neck;
  double left_trigger = 0.0;
  double right_trigger = 0.0;
};

double smooth_pulse(double t, double start, double rise, double hold) {
  // 0 -> 1 over `rise`, hold, 1 -> 0 over `rise`, cosine ramps.
  auto ramp = [](double x) { return 0.5 - 0.5 * std::cos(kPi * std::clamp(x, 0.0, 1.0)); };
  if (t < start) return 0.0;
  if (t < start + rise) return ramp((t - start) / rise);
  if (t < start + rise + hold) return 1.0;
  return 1.0 - ramp((t - start - rise - hold) / rise);
}

class Generator {
 public:
  Generator(const RobotModel& model, MotionKind kind, double duration, std::uint64_t seed)
      : model_(model), kind_(kind), duration_(duration), rng_(seed) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    speed_ = 0.35 + 0.05 * u(rng_);
    period_ = 1.1 + 0.05 * u(rng_);
    turn_rate_ = 0.08 * u(rng_);
    heading0_ = 0.5 * u(rng_);
    phase0_ = kPi * u(rng_);
    origin_ = Vec3(0.5 * u(rng_), 0.5 * u(rng_), 0.0);
    amp_ = 1.0 + 0.1 * u(rng_);
  }

  Sample at(double t) const {
    switch (kind_) {
      case MotionKind::kWalk: return walk(t);
      case MotionKind::kCrouch: return crouch(t);
      case MotionKind::kReach: return reach(t);
      case MotionKind::kHeadScan: return head_scan(t);
    }
    return {};
  }

 private:
  static constexpr double kStandHeight = 0.76;
  static constexpr double kThigh = 0.331;
  static constexpr double kShin = 0.317;

  LinkPose root_pose(double heading, double x, double y, double z, double roll,
                     double pitch) const {
    return {from_rpy({roll, pitch, heading}), origin_ + Vec3(x, y, z)};
  }

  void stand_arms(Pose& p) const {
    p.set_pair("shoulder_roll_joint", 0.2, -0.2);
    p.set_pair("elbow_joint", 0.9, 0.9);
  }

  Sample walk(double t) const {
    Pose p(model_);
    const double phase = 2.0 * kPi * t / period_ + phase0_;
    const double a = 0.22 * amp_;
    for (int side = 0; side < 2; ++side) {
      const double ph = phase + side * kPi;
      const std::string s = side == 0 ? "left_" : "right_";
      const double hip = -0.15 + a * std::sin(ph);
      const double knee = 0.35 + 0.18 * (1.0 + std::sin(ph + 0.6));
      p.set(s + "hip_pitch_joint", hip);
      p.set(s + "knee_joint", knee);
      p.set(s + "ankle_pitch_joint", -0.5 * (hip + knee) + 0.05);
      p.set(s + "hip_roll_joint", (side == 0 ? 1 : -1) * (0.04 + 0.02 * std::sin(ph)));
      p.set(s + "shoulder_pitch_joint", 0.1 - 0.2 * amp_ * std::sin(ph));
    }
    stand_arms(p);
    p.set("waist_yaw_joint", 0.06 * std::sin(phase));

    const double heading = heading0_ + turn_rate_ * t;
    double x = 0.0;
    double y = 0.0;
    if (std::abs(turn_rate_) > 1e-9) {
      x = speed_ / turn_rate_ * (std::sin(heading) - std::sin(heading0_));
      y = -speed_ / turn_rate_ * (std::cos(heading) - std::cos(heading0_));
    } else {
      x = speed_ * t * std::cos(heading0_);
      y = speed_ * t * std::sin(heading0_);
    }
    const double sway = 0.01 * std::sin(phase);
    x += -std::sin(heading) * sway;
    y += std::cos(heading) * sway;
    const double z = kStandHeight - 0.02 + 0.008 * std::cos(2.0 * phase);
    Sample out;
    out.q = p.q();
    out.root = root_pose(heading, x, y, z, 0.02 * std::sin(phase), 0.04);
    return out;
  }

  Sample crouch(double t) const {
    Pose p(model_);
    const double depth = smooth_pulse(t, 0.15 * duration_, 0.25 * duration_, 0.2 * duration_);
    const double bend = 0.95 * amp_ * depth;
    p.set_pair("hip_pitch_joint", -bend, -bend);
    p.set_pair("knee_joint", 2.0 * bend, 2.0 * bend);
    p.set_pair("ankle_pitch_joint", -bend, -bend);
    p.set_pair("hip_roll_joint", 0.03, -0.03);
    stand_arms(p);
    p.set_pair("shoulder_pitch_joint", -0.6 * depth, -0.6 * depth);
    const double drop = (kThigh + kShin) * (1.0 - std::cos(bend));
    const double shift = -(kThigh - kShin) * std::sin(bend);
    Sample out;
    out.q = p.q();
    out.root = root_pose(heading0_, shift * std::cos(heading0_), shift * std::sin(heading0_),
                         kStandHeight - drop, 0.0, 0.0);
    return out;
  }

  Sample reach(double t) const {
    Pose p(model_);
    const double extend = smooth_pulse(t, 0.1 * duration_, 0.2 * duration_, 0.3 * duration_);
    const double grip = smooth_pulse(t, 0.25 * duration_, 0.1 * duration_, 0.4 * duration_);
    p.set_pair("hip_pitch_joint", -0.1, -0.1);
    p.set_pair("knee_joint", 0.2, 0.2);
    p.set_pair("ankle_pitch_joint", -0.1, -0.1);
    p.set("waist_pitch_joint", 0.25 * extend);
    p.set_pair("shoulder_pitch_joint", -1.2 * amp_ * extend, -1.0 * amp_ * extend);
    p.set_pair("shoulder_roll_joint", 0.2 - 0.1 * extend, -0.2 + 0.1 * extend);
    p.set_pair("elbow_joint", 0.9 - 0.6 * extend, 0.9 - 0.6 * extend);
    p.set_pair("wrist_roll_joint", 0.3 * extend, -0.3 * extend);
    Sample out;
    out.q = p.q();
    out.root = root_pose(heading0_, 0.0, 0.0, kStandHeight - 0.01, 0.0, 0.02);
    out.left_trigger = grip;
    out.right_trigger = grip;
    return out;
  }

  Sample head_scan(double t) const {
    Pose p(model_);
    p.set_pair("hip_pitch_joint", -0.1, -0.1);
    p.set_pair("knee_joint", 0.2, 0.2);
    p.set_pair("ankle_pitch_joint", -0.1, -0.1);
    stand_arms(p);
    p.set("waist_yaw_joint", 0.05 * std::sin(2.0 * kPi * t / 5.0));
    Sample out;
    out.q = p.q();
    out.root = root_pose(heading0_, 0.0, 0.0, kStandHeight - 0.01, 0.0, 0.0);
    out.neck.yaw = 0.6 * std::sin(2.0 * kPi * t / 4.0);
    out.neck.pitch = 0.25 * std::sin(2.0 * kPi * t / 3.0);
    return out;
  }

  const RobotModel& model_;
  MotionKind kind_;
  double duration_;
  mutable std::mt19937_64 rng_;
  double speed_ = 0.0, period_ = 1.0, turn_rate_ = 0.0, heading0_ = 0.0, phase0_ = 0.0;
  double amp_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
};

}  // namespace

MotionKind parse_motion_kind(std::string_view name) {
  if (name == "walk") return MotionKind::kWalk;
  if (name == "crouch") return MotionKind::kCrouch;
  if (name == "reach") return MotionKind::kReach;
  if (name == "head-scan") return MotionKind::kHeadScan;
  throw std::invalid_argument("unknown motion kind '" + std::string(name) + "'");
}

std::string_view motion_kind_name(MotionKind kind) {
  switch (kind) {
    case MotionKind::kWalk: return "walk";
    case MotionKind::kCrouch: return "crouch";
    case MotionKind::kReach: return "reach";
    case MotionKind::kHeadScan: return "head-scan";
  }
  return "walk";
}

HumanPoseFrame frame_from_robot(const RobotModel& model, std::span<const double> q,
                                const LinkPose& root, const NeckAngles& neck) {
  const auto poses = link_poses(model, q, root);
  HumanPoseFrame frame;
  for (const auto& [human, robot] : model.mapping) {
    frame.set(human, poses[model.link_index(robot)]);
  }
  for (const auto& [human, robot] : model.mapping) {
    if (human != model.neck.spine) continue;
    const LinkPose head{rot_z(neck.yaw) * rot_y(neck.pitch), kHeadOffset};
    frame.set(model.neck.head, poses[model.link_index(robot)].compose(head));
  }
  return frame;
}

std::vector<HumanPoseFrame> gen_synthetic_motion(const RobotModel& model, MotionKind kind,
                                                 double duration_s, std::uint64_t seed,
                                                 double rate_hz) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("motion duration must be positive");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("motion rate must be positive");
  const Generator gen(model, kind, duration_s, seed);
  const auto count = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  const double period_ns = 1e9 / rate_hz;
  std::vector<HumanPoseFrame> frames;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / rate_hz;
    const Sample s = gen.at(t);
    HumanPoseFrame f = frame_from_robot(model, s.q, s.root, s.neck);
    f.timestamp_ns = std::llround(static_cast<double>(k) * period_ns);
    f.left_trigger = s.left_trigger;
    f.right_trigger = s.right_trigger;
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_pose_file(const std::filesystem::path& path, const PoseFileInfo& info,
                     std::span<const HumanPoseFrame> frames) {
  if (info.links.size() > 64) throw std::invalid_argument("pose file supports up to 64 links");
  nlohmann::json header{{"format", "tw2-pose"},     {"version", kPoseVersion},
                        {"kind", info.kind},        {"seed", info.seed},
                        {"rate_hz", info.rate_hz},  {"links", info.links},
                        {"frame_count", frames.size()}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> buf;
  ByteWriter w(buf);
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kPoseMagic), 4});
  w.put<std::uint32_t>(kPoseVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_string(text);
  for (const auto& f : frames) {
    w.put<std::int64_t>(f.timestamp_ns);
    w.put<double>(f.left_trigger);
    w.put<double>(f.right_trigger);
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < info.links.size(); ++i) {
      if (f.find(info.links[i])) mask |= (std::uint64_t{1} << i);
    }
    w.put<std::uint64_t>(mask);
    for (const auto& name : info.links) {
      auto it = f.links().find(name);
      const LinkPose pose = it == f.links().end() ? LinkPose{} : it->second.pose;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) w.put<double>(pose.rotation(r, c));
      }
      for (int c = 0; c < 3; ++c) w.put<double>(pose.position(c));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write pose file '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<HumanPoseFrame> read_pose_file(const std::filesystem::path& path,
                                           PoseFileInfo* info_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open pose file '" + path.string() + "'");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  try {
    ByteReader r(buf);
    if (std::memcmp(r.get_bytes(4).data(), kPoseMagic, 4) != 0) {
      throw ConfigError("'" + path.string() + "' is not a pose file");
    }
    if (r.get<std::uint32_t>() != kPoseVersion) throw ConfigError("unsupported pose file version");
    const auto header = nlohmann::json::parse(r.get_string(r.get<std::uint32_t>()));
    PoseFileInfo info;
    info.kind = header.at("kind").get<std::string>();
    info.seed = header.at("seed").get<std::uint64_t>();
    info.rate_hz = header.at("rate_hz").get<double>();
    info.links = header.at("links").get<std::vector<std::string>>();
    const auto count = header.at("frame_count").get<std::size_t>();
    std::vector<HumanPoseFrame> frames;
    frames.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      HumanPoseFrame f;
      f.timestamp_ns = r.get<std::int64_t>();
      f.left_trigger = r.get<double>();
      f.right_trigger = r.get<double>();
      const auto mask = r.get<std::uint64_t>();
      for (std::size_t i = 0; i < info.links.size(); ++i) {
        LinkPose pose;
        for (int rr = 0; rr < 3; ++rr) {
          for (int c = 0; c < 3; ++c) pose.rotation(rr, c) = r.get<double>();
        }
        for (int c = 0; c < 3; ++c) pose.position(c) = r.get<double>();
        f.set(info.links[i], pose, (mask >> i) & 1u);
      }
      frames.push_back(std::move(f));
    }
    if (info_out) *info_out = std::move(info);
    return frames;
  } catch (const ProtocolError&) {
    throw ConfigError("pose file '" + path.string() + "' is truncated");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("pose file '" + path.string() + "' has a bad header: " + e.what());
  }
}

}  // namespace tw2
