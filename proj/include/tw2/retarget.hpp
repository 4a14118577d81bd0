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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tw2/model.hpp"

namespace tw2 {

/// One streamed human body sample. Positions are stored on the
/// kPositionQuantum grid; rotations are kept as given.
class HumanPoseFrame {
 public:
  struct Entry {
    LinkPose pose;
    bool present = true;
    bool operator==(const Entry&) const = default;
  };

  std::int64_t timestamp_ns = 0;
  // Controller trigger values in [0, 1]; drive the grasp command.
  double left_trigger = 0.0;
  double right_trigger = 0.0;

  void set(const std::string& name, const LinkPose& pose, bool present = true);
  void set_present(const std::string& name, bool present);
  void erase(const std::string& name) { links_.erase(name); }

  /// Pose of a link that is in the frame and valid this sample.
  const LinkPose* find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }

  /// Adds `offset` (snapped to the position grid) to every link position.
  void translate(const Vec3& offset);

  const std::map<std::string, Entry, std::less<>>& links() const { return links_; }

  bool operator==(const HumanPoseFrame&) const = default;

 private:
  std::map<std::string, Entry, std::less<>> links_;
};

/// Grasp command: alpha = 0 fully open, 1 fully closed.
struct GraspCommand {
  double alpha = 0.0;
  GraspMode mode = GraspMode::kPower;

  /// Throws std::invalid_argument unless 0 <= alpha <= 1.
  static GraspCommand make(double alpha, GraspMode mode);
  /// Linear trigger-to-alpha map, saturating outside [0, 1].
  static GraspCommand from_trigger(double trigger, GraspMode mode);
};

struct NeckAngles {
  double yaw = 0.0;
  double pitch = 0.0;
  bool degenerate = false;  // |r31| at 1: yaw and roll are not separable
};

struct SolveTrace {
  std::vector<std::vector<double>> iterates;  // accepted iterates, starting point first
  std::vector<double> objectives;
};

struct RetargetResult {
  std::vector<double> q;
  LinkPose root;  // robot pelvis pose, taken from the human pelvis
  NeckAngles neck;
  std::vector<double> left_hand;
  std::vector<double> right_hand;
  double residual = 0.0;  // objective value at q
  int iterations = 0;
  bool degraded = false;
};

class MissingLinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value of the weighted rotation + pelvis-centric position objective at q.
double retarget_objective(const RobotModel& model, const HumanPoseFrame& frame,
                          std::span<const double> q);

/// Closed-form per-joint rotation alignment, used as the stage-2 starting
/// point when there is no warm start.
std::vector<double> initial_guess(const RobotModel& model, const HumanPoseFrame& frame);

/// Projected Levenberg-Marquardt solve of the stage-2 objective. Neck and
/// hands in the result are left empty.
RetargetResult retarget_body(const RobotModel& model, const HumanPoseFrame& frame,
                             std::optional<std::span<const double>> warm_start = std::nullopt,
                             SolveTrace* trace = nullptr);

std::vector<double> retarget_hand(const GripperPoses& poses, const GraspCommand& cmd);

/// Yaw/pitch of R_rel = Rz(yaw) * Ry(pitch) * (roll); no limits applied.
NeckAngles extract_neck_angles(const Mat3& r_rel);

/// Neck targets from the human head and spine, clamped to the model limits.
NeckAngles retarget_neck(const RobotModel& model, const HumanPoseFrame& frame);

RetargetResult retarget_frame(const RobotModel& model, const HumanPoseFrame& frame,
                              const GraspCommand& left, const GraspCommand& right,
                              std::optional<std::span<const double>> warm_start = std::nullopt);

/// Per-operator retargeting state: keeps the previous solution as warm start.
/// Not reentrant.
class RetargetSession {
 public:
  explicit RetargetSession(const RobotModel& model) : model_(model) {}

  RetargetResult process(const HumanPoseFrame& frame, const GraspCommand& left,
                         const GraspCommand& right);
  void reset() { warm_.reset(); }

 private:
  const RobotModel& model_;
  std::optional<std::vector<double>> warm_;
};

}  // namespace tw2
