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


#include "tw2/offline.hpp"

#include <cmath>

namespace tw2 {

std::vector<CommandVector> commands_from_motion(const RobotModel& model,
                                                std::span<const HumanPoseFrame> frames,
                                                double command_rate_hz) {
  if (frames.size() < 2) return {};
  const double in_rate =
      1e9 / static_cast<double>(frames[1].timestamp_ns - frames[0].timestamp_ns);
  const auto stride = std::max<long>(1, std::lround(in_rate / command_rate_hz));
  RetargetSession session(model);
  CommandDeriver deriver(model.velocity_smoothing);
  std::vector<CommandVector> out;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const auto result =
        session.process(f, GraspCommand::from_trigger(f.left_trigger, GraspMode::kPower),
                        GraspCommand::from_trigger(f.right_trigger, GraspMode::kPower));
    auto cmd = deriver.push(RobotPoseSample::from_result(result, f.timestamp_ns));
    if (static_cast<long>(k) % stride == 0) out.push_back(std::move(cmd));
  }
  return out;
}

TrackReport track_commands(const RobotModel& model, std::span<const CommandVector> commands,
                           const SimConfig& config, double alpha) {
  TrackReport report;
  if (commands.empty()) return report;
  const Layout layout = Layout::for_model(model);
  const auto& first = commands.front();
  SimState state = make_sim_state(model, config,
                                  {from_rpy({first.roll, first.pitch, 0.0}),
                                   Vec3(0.0, 0.0, first.z)});
  state.q = actuated_targets(first);
  double sum_r = 0.0;
  double sum_e = 0.0;
  for (std::size_t k = 1; k < commands.size(); ++k) {
    const double dt =
        static_cast<double>(commands[k].timestamp_ns - commands[k - 1].timestamp_ns) * 1e-9;
    state = step(state, commands[k], dt);
    const auto m = tracking_metric(flatten(layout, commands[k]),
                                   flatten(layout, achieved_command(layout, state)), alpha);
    sum_r += m.r_track;
    sum_e += m.error_norm;
    report.min_r_track = std::min(report.min_r_track, m.r_track);
    ++report.steps;
  }
  if (report.steps > 0) {
    report.mean_r_track = sum_r / static_cast<double>(report.steps);
    report.mean_error_norm = sum_e / static_cast<double>(report.steps);
  }
  return report;
}

}  // namespace tw2
