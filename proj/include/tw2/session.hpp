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
#include <optional>
#include <string_view>

#include "tw2/command.hpp"

namespace tw2 {

enum class Mode : std::uint8_t { kIdle = 0, kActive = 1, kPaused = 2, kInterpolating = 3, kStopped = 4 };

/// CTRL payload byte. Transition events and recording marks share the space.
enum class CtrlCode : std::uint8_t {
  kStart = 1,
  kPause = 2,
  kResume = 3,
  kStop = 4,
  kEstop = 5,
  kInterpDone = 6,  // sent by the command producer when a resume blend ends
  kMarkEpisodeStart = 16,
  kMarkEpisodeEnd = 17,
  kMarkFailure = 18,
};

bool is_transition(CtrlCode c);
bool is_mark(CtrlCode c);
std::string_view mode_name(Mode m);
std::string_view ctrl_name(CtrlCode c);
/// Accepts the lower-case names printed by ctrl_name; throws std::invalid_argument.
CtrlCode parse_ctrl(std::string_view name);
/// Throws ProtocolError for a byte that is not a known code.
CtrlCode ctrl_from_byte(std::uint8_t b);

/// Legal transitions: IDLE -start-> ACTIVE; ACTIVE -pause-> PAUSED;
/// INTERPOLATING -pause-> PAUSED; PAUSED -resume-> INTERPOLATING;
/// INTERPOLATING -interp_done-> ACTIVE; stop from any mode but STOPPED;
/// estop from any mode. STOPPED is terminal.
std::optional<Mode> next_mode(Mode m, CtrlCode event);
bool is_legal(Mode m, CtrlCode event);

/// Gates the live command stream according to the session mode. Owned by
/// the command-producing task; events arrive serialized through apply().
class SessionController {
 public:
  /// `rate_hz` is the output tick rate; a resume blends over
  /// round(duration_s * rate_hz) ticks.
  SessionController(double interp_duration_s, double rate_hz);

  Mode mode() const { return mode_; }
  /// Applies a transition; returns false and leaves the state unchanged when
  /// the event is illegal.
  bool apply(CtrlCode event);

  /// Output for one tick given the live target. nullopt means "emit nothing"
  /// (IDLE, STOPPED). On the tick that finishes a resume blend the mode
  /// becomes ACTIVE and interp_finished() reports true once.
  std::optional<CommandVector> tick(const CommandVector& live);
  bool interp_finished();

  /// Zero-velocity command holding the last emitted pose, if any.
  std::optional<CommandVector> hold_command(std::int64_t timestamp_ns) const;

  int interp_steps() const { return steps_; }

 private:
  static CommandVector blend(const CommandVector& from, const CommandVector& to, double a);

  Mode mode_ = Mode::kIdle;
  int steps_;
  int step_ = 0;
  bool finished_ = false;
  std::optional<CommandVector> last_;
  std::optional<CommandVector> frozen_;
};

}  // namespace tw2
