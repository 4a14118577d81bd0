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

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tw2/errors.hpp"
#include "tw2/geometry.hpp"

namespace tw2 {

struct Link {
  std::string name;
  int parent = -1;  // index into RobotModel::links, -1 for the root
  Quat fixed_rotation = Quat::Identity();
  Vec3 fixed_translation = Vec3::Zero();
  int joint = -1;  // joint that drives this link, -1 if rigidly attached
};

/// Revolute joint. The axis is expressed in the child link frame and the
/// joint rotates the child about its own origin.
struct Joint {
  std::string name;
  int parent_link = -1;
  int child_link = -1;
  Vec3 axis = Vec3::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
};

struct SolverOptions {
  double lambda_pos = 1.0;
  int max_iterations = 30;
  double step_tolerance = 1e-6;
  double decrease_tolerance = 1e-10;
  double initial_damping = 1e-3;
  bool pelvis_position = false;
  int stage1_sweeps = 3;
};

struct NeckConfig {
  std::string head = "head";
  std::string spine = "spine3";
  double yaw_lower = -1.2;
  double yaw_upper = 1.2;
  double pitch_lower = -0.7;
  double pitch_upper = 0.9;
};

enum class GraspMode { kPower, kPinch };

/// Canonical open and close hand configurations for one grasp mode.
struct GripperPoses {
  std::vector<double> q_open;
  std::vector<double> q_close;
};

struct HandConfig {
  std::vector<std::string> joints;
  std::vector<double> lower;
  std::vector<double> upper;
  GripperPoses power;
  GripperPoses pinch;

  const GripperPoses& poses(GraspMode mode) const {
    return mode == GraspMode::kPower ? power : pinch;
  }
};

struct RobotModel {
  std::string name;
  std::vector<Link> links;
  std::vector<Joint> joints;

  std::vector<std::string> lower_body;  // robot link names
  std::vector<std::string> upper_body;

  // human link name -> robot link name, in config order
  std::vector<std::pair<std::string, std::string>> mapping;
  std::map<std::string, double> rotation_weights;  // robot link -> w_R
  std::map<std::string, double> position_weights;  // robot link -> w_p

  SolverOptions solver;
  NeckConfig neck;
  HandConfig left_hand;
  HandConfig right_hand;
  double velocity_smoothing = 0.2;

  std::string hash;  // FNV-1a of the source text, hex

  std::size_t dof() const { return joints.size(); }
  int link_index(std::string_view name) const;
  int joint_index(std::string_view name) const;
  std::vector<std::string> joint_names() const;

  /// Robot links carrying a position term, in link order. The root is
  /// included only when solver.pelvis_position is set.
  std::vector<std::string> position_points() const;
  /// Human name mapped to a robot link, or nullopt.
  std::optional<std::string> human_for(std::string_view robot_link) const;
};

/// Parses a model config document (YAML). Throws ConfigError on malformed
/// input and ValidationError when an invariant fails.
RobotModel parse_model(std::string_view text);
RobotModel load_model(const std::filesystem::path& path);

/// Checks every RobotModel invariant; the message names the offending entity.
void validate_model(const RobotModel& model);

/// Path of the bundled 29-DoF demo humanoid, resolved at build time.
std::filesystem::path demo_model_path();

/// World pose of every link, indexed like RobotModel::links.
std::vector<LinkPose> link_poses(const RobotModel& model, std::span<const double> q,
                                 const LinkPose& root);

std::map<std::string, LinkPose> forward_kinematics(const RobotModel& model,
                                                   std::span<const double> q,
                                                   const LinkPose& root);

/// Geometric Jacobian of a link origin: rows 0-2 angular velocity, rows 3-5
/// linear velocity, both in the world frame of `root`.
MatX jacobian(const RobotModel& model, std::span<const double> q, std::string_view link,
              const LinkPose& root = LinkPose::identity());

/// Joint indices on the root -> link chain, root side first.
std::vector<int> chain_joints(const RobotModel& model, int link);

void clamp_to_limits(const RobotModel& model, std::span<double> q);

}  // namespace tw2
