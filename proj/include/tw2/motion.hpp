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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tw2/model.hpp"
#include "tw2/retarget.hpp"

namespace tw2 {

enum class MotionKind { kWalk, kCrouch, kReach, kHeadScan };

MotionKind parse_motion_kind(std::string_view name);
std::string_view motion_kind_name(MotionKind kind);

/// Human frame whose mapped links coincide with the robot links at (q, root),
/// plus a head placed on the spine link with the given neck rotation.
HumanPoseFrame frame_from_robot(const RobotModel& model, std::span<const double> q,
                                const LinkPose& root, const NeckAngles& neck = {});

/// Deterministic, seeded human motion at `rate_hz` (PICO streams at 100 Hz).
/// Frames are FK of a human skeleton with the demo robot's proportions, so
/// link poses are kinematically consistent.
std::vector<HumanPoseFrame> gen_synthetic_motion(const RobotModel& model, MotionKind kind,
                                                 double duration_s, std::uint64_t seed,
                                                 double rate_hz = 100.0);

struct PoseFileInfo {
  std::string kind;
  std::uint64_t seed = 0;
  double rate_hz = 100.0;
  std::vector<std::string> links;
};

void write_pose_file(const std::filesystem::path& path, const PoseFileInfo& info,
                     std::span<const HumanPoseFrame> frames);
std::vector<HumanPoseFrame> read_pose_file(const std::filesystem::path& path,
                                           PoseFileInfo* info = nullptr);

}  // namespace tw2
