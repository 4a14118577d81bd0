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


#include "tw2/session.hpp"

#include <cmath>
#include <string>

namespace tw2 {

bool is_transition(CtrlCode c) {
  const auto v = static_cast<std::uint8_t>(c);
  return v >= 1 && v <= 6;
}

bool is_mark(CtrlCode c) {
  const auto v = static_cast<std::uint8_t>(c);
  return v >= 16 && v <= 18;
}

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::kIdle: return "IDLE";
    case Mode::kActive: return "ACTIVE";
    case Mode::kPaused: return "PAUSED";
    case Mode::kInterpolating: return "INTERPOLATING";
    case Mode::kStopped: return "STOPPED";
  }
  return "?";
}

std::string_view ctrl_name(CtrlCode c) {
  switch (c) {
    case CtrlCode::kStart: return "start";
    case CtrlCode::kPause: return "pause";
    case CtrlCode::kResume: return "resume";
    case CtrlCode::kStop: return "stop";
    case CtrlCode::kEstop: return "estop";
    case CtrlCode::kInterpDone: return "interp_done";
    case CtrlCode::kMarkEpisodeStart: return "episode_start";
    case CtrlCode::kMarkEpisodeEnd: return "episode_end";
    case CtrlCode::kMarkFailure: return "failure";
  }
  return "?";
}

CtrlCode parse_ctrl(std::string_view name) {
  for (std::uint8_t b : {1, 2, 3, 4, 5, 6, 16, 17, 18}) {
    const auto c = static_cast<CtrlCode>(b);
    if (ctrl_name(c) == name) return c;
  }
  throw std::invalid_argument("unknown control event '" + std::string(name) + "'");
}

CtrlCode ctrl_from_byte(std::uint8_t b) {
  const auto c = static_cast<CtrlCode>(b);
  if (!is_transition(c) && !is_mark(c)) {
    throw ProtocolError("unknown control code " + std::to_string(b));
  }
  return c;
}

std::optional<Mode> next_mode(Mode m, CtrlCode event) {
  switch (event) {
    case CtrlCode::kStart:
      if (m == Mode::kIdle) return Mode::kActive;
      break;
    case CtrlCode::kPause:
      if (m == Mode::kActive || m == Mode::kInterpolating) return Mode::kPaused;
      break;
    case CtrlCode::kResume:
      if (m == Mode::kPaused) return Mode::kInterpolating;
      break;
    case CtrlCode::kInterpDone:
      if (m == Mode::kInterpolating) return Mode::kActive;
      break;
    case CtrlCode::kStop:
      if (m != Mode::kStopped) return Mode::kStopped;
      break;
    case CtrlCode::kEstop:
      return Mode::kStopped;
    default:
      break;
  }
  return std::nullopt;
}

bool is_legal(Mode m, CtrlCode event) { return next_mode(m, event).has_value(); }

SessionController::SessionController(double interp_duration_s, double rate_hz) {
  if (!(interp_duration_s >= 0.0) || !(rate_hz > 0.0)) {
    throw std::invalid_argument("interpolation duration and rate must be positive");
  }
  steps_ = std::max(1, static_cast<int>(std::lround(interp_duration_s * rate_hz)));
}

bool SessionController::apply(CtrlCode event) {
  const auto next = next_mode(mode_, event);
  if (!next) return false;
  if (*next == Mode::kPaused) {
    // Freeze whatever was last emitted, mid-blend included.
    frozen_ = last_;
  } else if (*next == Mode::kInterpolating) {
    step_ = 0;
  }
  mode_ = *next;
  return true;
}

CommandVector SessionController::blend(const CommandVector& from, const CommandVector& to,
                                       double a) {
  auto mix = [a](double x, double y) { return a == 1.0 ? y : (1.0 - a) * x + a * y; };
  auto mix_vec = [&](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = mix(x[i], y[i]);
    return out;
  };
  CommandVector c = to;
  c.vx = mix(from.vx, to.vx);
  c.vy = mix(from.vy, to.vy);
  c.z = mix(from.z, to.z);
  c.roll = mix(from.roll, to.roll);
  c.pitch = mix(from.pitch, to.pitch);
  c.yaw_rate = mix(from.yaw_rate, to.yaw_rate);
  c.q_ref = mix_vec(from.q_ref, to.q_ref);
  c.neck_yaw = mix(from.neck_yaw, to.neck_yaw);
  c.neck_pitch = mix(from.neck_pitch, to.neck_pitch);
  c.left_hand = mix_vec(from.left_hand, to.left_hand);
  c.right_hand = mix_vec(from.right_hand, to.right_hand);
  return c;
}

std::optional<CommandVector> SessionController::tick(const CommandVector& live) {
  switch (mode_) {
    case Mode::kIdle:
    case Mode::kStopped:
      return std::nullopt;
    case Mode::kActive:
      last_ = live;
      return live;
    case Mode::kPaused: {
      if (!frozen_) frozen_ = live;
      CommandVector c = *frozen_;
      c.vx = c.vy = c.yaw_rate = 0.0;
      c.timestamp_ns = live.timestamp_ns;
      frozen_ = c;
      last_ = c;
      return c;
    }
    case Mode::kInterpolating: {
      if (!frozen_) frozen_ = live;
      ++step_;
      const double a = static_cast<double>(step_) / steps_;
      CommandVector c = blend(*frozen_, live, std::min(a, 1.0));
      c.timestamp_ns = live.timestamp_ns;
      last_ = c;
      if (step_ >= steps_) {
        mode_ = Mode::kActive;
        finished_ = true;
        frozen_.reset();
      }
      return c;
    }
  }
  return std::nullopt;
}

bool SessionController::interp_finished() {
  const bool f = finished_;
  finished_ = false;
  return f;
}

std::optional<CommandVector> SessionController::hold_command(std::int64_t timestamp_ns) const {
  if (!last_) return std::nullopt;
  CommandVector c = *last_;
  c.vx = c.vy = c.yaw_rate = 0.0;
  c.timestamp_ns = timestamp_ns;
  return c;
}

}  // namespace tw2
