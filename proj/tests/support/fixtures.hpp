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


// Shared fixtures for the unit and acceptance suites.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "tw2/model.hpp"

namespace tw2::testing {

// pelvis -> arm (revolute z at the pelvis origin) -> tip 1 m along x.
inline const char* kSingleJointModel = R"(
name: single
links:
  - {name: pelvis}
  - {name: arm, parent: pelvis}
  - {name: tip, parent: arm, xyz: [1, 0, 0]}
  - {name: side, parent: pelvis, xyz: [0, 0.5, 0]}
joints:
  - {name: yaw, parent: pelvis, child: arm, axis: [0, 0, 1], limits: [-3.0, 3.0]}
  - {name: side_joint, parent: pelvis, child: side, axis: [1, 0, 0], limits: [-1.0, 1.0]}
)";

// Sagittal-plane leg: hip, knee and ankle pitch with a foot point.
inline const char* kPlanarLegModel = R"(
name: planar_leg
links:
  - {name: pelvis}
  - {name: thigh, parent: pelvis, xyz: [0, 0.1, -0.05]}
  - {name: shin, parent: thigh, xyz: [0, 0, -0.4]}
  - {name: ankle, parent: shin, xyz: [0, 0, -0.4]}
  - {name: foot, parent: ankle, xyz: [0.12, 0, -0.05]}
joints:
  - {name: hip, parent: pelvis, child: thigh, axis: [0, 1, 0], limits: [-1.5, 1.0]}
  - {name: knee, parent: thigh, child: shin, axis: [0, 1, 0], limits: [0.0, 2.2]}
  - {name: ankle_pitch, parent: shin, child: ankle, axis: [0, 1, 0], limits: [-0.8, 0.8]}
groups:
  lower: [pelvis, foot]
  upper: []
mapping:
  pelvis: pelvis
  foot: foot
weights:
  rotation: {pelvis: 0.0, foot: 1.0}
  position: {foot: 5.0}
solver:
  max_iterations: 30
)";

inline std::vector<double> random_config(const RobotModel& model, std::mt19937_64& rng,
                                         double margin = 0.0) {
  std::vector<double> q(model.dof());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& j = model.joints[i];
    std::uniform_real_distribution<double> d(j.lower + margin, j.upper - margin);
    q[i] = d(rng);
  }
  return q;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat qt(n(rng), n(rng), n(rng), n(rng));
  return qt.normalized().toRotationMatrix();
}

inline LinkPose random_pose(std::mt19937_64& rng, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return {random_rotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

}  // namespace tw2::testing
