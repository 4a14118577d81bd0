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
#include <span>
#include <vector>

#include "tw2/command.hpp"
#include "tw2/retarget.hpp"
#include "tw2/session.hpp"
#include "tw2/wire.hpp"

namespace tw2 {

// CMD: flattened CommandVector as f64[command_dim]. The header timestamp is
// the timestamp of the pose the command was derived from.
std::vector<std::uint8_t> encode_cmd(const Layout& layout, const CommandVector& cmd);
CommandVector decode_cmd(const Layout& layout, const Message& m);

// STATE: u64 origin timestamp of the command last applied, then the
// flattened ProprioState as f64[state_dim].
struct StatePayload {
  std::int64_t cmd_origin_ns = 0;
  ProprioState state;
};
std::vector<std::uint8_t> encode_state(const Layout& layout, const StatePayload& s);
StatePayload decode_state(const Layout& layout, const Message& m);

// POSE: f64 left trigger, f64 right trigger, u16 link count, then per link
// u8 name length, name bytes, u8 present, f64[9] rotation (row-major),
// f64[3] position.
std::vector<std::uint8_t> encode_pose(const HumanPoseFrame& frame);
HumanPoseFrame decode_pose(const Message& m);

// CTRL: u8 code; acknowledgements append u8 mode.
struct CtrlPayload {
  CtrlCode code = CtrlCode::kStart;
  std::optional<Mode> mode;
};
std::vector<std::uint8_t> encode_ctrl(const CtrlPayload& c);
CtrlPayload decode_ctrl(const Message& m);

// LATENCY: u64 requester id, u64 probe id, u64 send time (requester clock).
struct LatencyProbe {
  std::uint64_t requester = 0;
  std::uint64_t probe = 0;
  std::int64_t sent_ns = 0;
};
std::vector<std::uint8_t> encode_probe(const LatencyProbe& p);
LatencyProbe decode_probe(const Message& m);

std::vector<std::uint8_t> encode_doubles(std::span<const double> v);
std::vector<double> decode_doubles(std::span<const std::uint8_t> bytes);

}  // namespace tw2
