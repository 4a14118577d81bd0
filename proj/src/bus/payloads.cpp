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


#include "tw2/payloads.hpp"

#include <string>

#include "tw2/binary_io.hpp"

namespace tw2 {
namespace {

void expect_type(const Message& m, MsgType t) {
  if (m.type != t) {
    throw ProtocolError("expected " + std::string(type_name(t)) + " message, got " +
                        std::string(type_name(m.type)));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_doubles(std::span<const double> v) {
  std::vector<std::uint8_t> out;
  ByteWriter(out).put_doubles(v);
  return out;
}

std::vector<double> decode_doubles(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % sizeof(double) != 0) throw ProtocolError("payload is not an f64 array");
  return ByteReader(bytes).get_doubles(bytes.size() / sizeof(double));
}

std::vector<std::uint8_t> encode_cmd(const Layout& layout, const CommandVector& cmd) {
  return encode_doubles(flatten(layout, cmd));
}

CommandVector decode_cmd(const Layout& layout, const Message& m) {
  expect_type(m, MsgType::kCmd);
  const auto flat = decode_doubles(m.payload);
  if (flat.size() != layout.command_dim()) {
    throw ProtocolError("CMD payload has " + std::to_string(flat.size()) + " values, layout has " +
                        std::to_string(layout.command_dim()));
  }
  return unflatten_command(layout, flat, static_cast<std::int64_t>(m.timestamp_ns));
}

std::vector<std::uint8_t> encode_state(const Layout& layout, const StatePayload& s) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put<std::int64_t>(s.cmd_origin_ns);
  w.put_doubles(flatten(layout, s.state));
  return out;
}

StatePayload decode_state(const Layout& layout, const Message& m) {
  expect_type(m, MsgType::kState);
  ByteReader r(m.payload);
  StatePayload s;
  s.cmd_origin_ns = r.get<std::int64_t>();
  if (r.remaining() != layout.state_dim() * sizeof(double)) {
    throw ProtocolError("STATE payload does not match layout");
  }
  s.state = unflatten_state(layout, r.get_doubles(layout.state_dim()),
                            static_cast<std::int64_t>(m.timestamp_ns));
  return s;
}

std::vector<std::uint8_t> encode_pose(const HumanPoseFrame& frame) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put<double>(frame.left_trigger);
  w.put<double>(frame.right_trigger);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(frame.links().size()));
  for (const auto& [name, entry] : frame.links()) {
    if (name.size() > 255) throw ProtocolError("link name too long: " + name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(name.size()));
    w.put_string(name);
    w.put<std::uint8_t>(entry.present ? 1 : 0);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) w.put<double>(entry.pose.rotation(r, c));
    }
    for (int c = 0; c < 3; ++c) w.put<double>(entry.pose.position(c));
  }
  return out;
}

HumanPoseFrame decode_pose(const Message& m) {
  expect_type(m, MsgType::kPose);
  ByteReader r(m.payload);
  HumanPoseFrame f;
  f.timestamp_ns = static_cast<std::int64_t>(m.timestamp_ns);
  f.left_trigger = r.get<double>();
  f.right_trigger = r.get<double>();
  const auto n = r.get<std::uint16_t>();
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::string name = r.get_string(r.get<std::uint8_t>());
    const bool present = r.get<std::uint8_t>() != 0;
    LinkPose p;
    for (int rr = 0; rr < 3; ++rr) {
      for (int c = 0; c < 3; ++c) p.rotation(rr, c) = r.get<double>();
    }
    for (int c = 0; c < 3; ++c) p.position(c) = r.get<double>();
    f.set(name, p, present);
  }
  if (r.remaining() != 0) throw ProtocolError("trailing bytes in POSE payload");
  return f;
}

std::vector<std::uint8_t> encode_ctrl(const CtrlPayload& c) {
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(c.code)};
  if (c.mode) out.push_back(static_cast<std::uint8_t>(*c.mode));
  return out;
}

CtrlPayload decode_ctrl(const Message& m) {
  expect_type(m, MsgType::kCtrl);
  if (m.payload.empty() || m.payload.size() > 2) throw ProtocolError("bad CTRL payload size");
  CtrlPayload c;
  c.code = ctrl_from_byte(m.payload[0]);
  if (m.payload.size() == 2) {
    if (m.payload[1] > static_cast<std::uint8_t>(Mode::kStopped)) {
      throw ProtocolError("bad mode byte in CTRL payload");
    }
    c.mode = static_cast<Mode>(m.payload[1]);
  }
  return c;
}

std::vector<std::uint8_t> encode_probe(const LatencyProbe& p) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put<std::uint64_t>(p.requester);
  w.put<std::uint64_t>(p.probe);
  w.put<std::int64_t>(p.sent_ns);
  return out;
}

LatencyProbe decode_probe(const Message& m) {
  expect_type(m, MsgType::kLatency);
  if (m.payload.size() != 24) throw ProtocolError("bad LATENCY payload size");
  ByteReader r(m.payload);
  LatencyProbe p;
  p.requester = r.get<std::uint64_t>();
  p.probe = r.get<std::uint64_t>();
  p.sent_ns = r.get<std::int64_t>();
  return p;
}

}  // namespace tw2
