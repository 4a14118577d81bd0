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

#include <span>
#include <vector>

#include "tw2/command.hpp"
#include "tw2/retarget.hpp"
#include "tw2/sim.hpp"

namespace tw2 {

/// Retargets a pose stream (warm-started) and derives one command per frame,
/// then keeps every frame whose index is a multiple of rate_in / rate_out.
std::vector<CommandVector> commands_from_motion(const RobotModel& model,
                                                std::span<const HumanPoseFrame> frames,
                                                double command_rate_hz);

struct TrackReport {
  double mean_r_track = 0.0;
  double min_r_track = 1.0;
  double mean_error_norm = 0.0;
  std::size_t steps = 0;
};

/// Feeds commands through a fresh plant placed at the first command's pose,
/// stepping by timestamp differences, and scores each step.
TrackReport track_commands(const RobotModel& model, std::span<const CommandVector> commands,
                           const SimConfig& config = {}, double alpha = 1.0);

}  // namespace tw2
