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


#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "tw2/model.hpp"
#include "tw2/payloads.hpp"
#include "tw2/wire.hpp"

namespace tw2 {
namespace {

const Layout& layout() {
  static const Layout l = Layout::for_model(load_model(demo_model_path()));
  return l;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Reference bytes for one framed CMD message; any change here is a wire break.
TEST(Wire, GoldenHeaderBytes) {
  const Header h{MsgType::kCmd, kFlagAck, 0x01020304u, 0x1122334455667788ull, 5};
  const std::array<std::uint8_t, kHeaderSize> golden{
      'T',  'W',  '2',  'B',  0x01, 0x02, 0x01, 0x00, 0x04, 0x03, 0x02, 0x01,
      0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11, 0x05, 0x00, 0x00, 0x00};
  EXPECT_EQ(encode_header(h), golden);
  const Header back = decode_header(golden);
  EXPECT_EQ(back.type, h.type);
  EXPECT_EQ(back.flags, h.flags);
  EXPECT_EQ(back.seq, h.seq);
  EXPECT_EQ(back.timestamp_ns, h.timestamp_ns);
  EXPECT_EQ(back.payload_len, h.payload_len);
}

TEST(Wire, GoldenCtrlMessage) {
  const Message m{MsgType::kCtrl, 0, 7, 1000, {static_cast<std::uint8_t>(CtrlCode::kPause)}};
  const std::vector<std::uint8_t> golden{'T', 'W', '2', 'B', 1, 5, 0, 0, 7, 0, 0, 0, 0xe8,
                                         0x03, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 2};
  EXPECT_EQ(encode(m), golden);
  EXPECT_EQ(decode(golden), m);
}

TEST(Wire, RejectsMalformedHeaders) {
  auto bytes = encode_header({MsgType::kCmd, 0, 1, 1, 0});
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_header(bad), ProtocolError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(decode_header(bad), ProtocolError);
  bad = bytes;
  bad[5] = 0;
  EXPECT_THROW(decode_header(bad), ProtocolError);
  bad[5] = 10;
  EXPECT_THROW(decode_header(bad), ProtocolError);
  bad = bytes;
  const std::uint32_t big = kMaxPayload + 1;
  std::memcpy(bad.data() + 20, &big, 4);
  EXPECT_THROW(decode_header(bad), ProtocolError);
  EXPECT_THROW(decode_header(std::span(bytes).first(10)), ProtocolError);
}

TEST(Wire, OversizedPayloadRefused) {
  Message m{MsgType::kFrame, 0, 1, 1, std::vector<std::uint8_t>(kMaxPayload + 1)};
  EXPECT_THROW(encode(m), ProtocolError);
  m.payload.resize(kMaxPayload);
  EXPECT_EQ(encode(m).size(), kHeaderSize + kMaxPayload);
}

TEST(Wire, LengthMismatchRejected) {
  auto bytes = encode({MsgType::kCmd, 0, 1, 1, {1, 2, 3}});
  bytes.pop_back();
  EXPECT_THROW(decode(bytes), ProtocolError);
}

TEST(Wire, TypeNames) {
  for (std::uint8_t t = 1; t <= 9; ++t) {
    const auto type = static_cast<MsgType>(t);
    EXPECT_EQ(parse_type(type_name(type)), type);
  }
  EXPECT_FALSE(is_valid_type(0));
  EXPECT_THROW(parse_type("video"), std::invalid_argument);
}

TEST(Payloads, CmdRoundTripBitExact) {
  const auto flat = random_vec(layout().command_dim(), 1);
  const auto cmd = unflatten_command(layout(), flat, 42);
  const Message m{MsgType::kCmd, 0, 1, 42, encode_cmd(layout(), cmd)};
  EXPECT_EQ(m.payload.size(), layout().command_dim() * 8);
  EXPECT_EQ(flatten(layout(), decode_cmd(layout(), m)), flat);
}

TEST(Payloads, CmdWrongLengthRejected) {
  Message m{MsgType::kCmd, 0, 1, 42, std::vector<std::uint8_t>(8 * 50)};
  EXPECT_THROW(decode_cmd(layout(), m), ProtocolError);
  m.type = MsgType::kState;
  EXPECT_THROW(decode_cmd(layout(), m), ProtocolError);
}

TEST(Payloads, StateRoundTrip) {
  auto flat = random_vec(layout().state_dim(), 2);
  const StatePayload s{-77, unflatten_state(layout(), flat, 9)};
  const Message m{MsgType::kState, 0, 1, 9, encode_state(layout(), s)};
  const auto back = decode_state(layout(), m);
  EXPECT_EQ(back.cmd_origin_ns, -77);
  EXPECT_EQ(flatten(layout(), back.state), flatten(layout(), s.state));
}

TEST(Payloads, PoseRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HumanPoseFrame f;
  f.timestamp_ns = 5;
  f.left_trigger = 0.25;
  f.right_trigger = 0.75;
  for (const char* name : {"pelvis", "head", "left_hand"}) {
    const Mat3 r = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized().toRotationMatrix();
    f.set(name, {r, Vec3(u(rng), u(rng), u(rng))});
  }
  f.set_present("left_hand", false);
  const Message m{MsgType::kPose, 0, 1, 5, encode_pose(f)};
  EXPECT_EQ(decode_pose(m), f);
}

TEST(Payloads, CtrlAndProbe) {
  const Message ctrl{MsgType::kCtrl, kFlagAck, 1, 1,
                     encode_ctrl({CtrlCode::kResume, Mode::kInterpolating})};
  const auto c = decode_ctrl(ctrl);
  EXPECT_EQ(c.code, CtrlCode::kResume);
  EXPECT_EQ(c.mode, Mode::kInterpolating);
  EXPECT_THROW(decode_ctrl({MsgType::kCtrl, 0, 1, 1, {99}}), ProtocolError);
  EXPECT_THROW(decode_ctrl({MsgType::kCtrl, 0, 1, 1, {}}), ProtocolError);

  const LatencyProbe p{0xdeadbeef, 12, -3};
  const Message m{MsgType::kLatency, 0, 1, 1, encode_probe(p)};
  EXPECT_EQ(m.payload.size(), 24u);
  const auto q = decode_probe(m);
  EXPECT_EQ(q.requester, p.requester);
  EXPECT_EQ(q.probe, p.probe);
  EXPECT_EQ(q.sent_ns, p.sent_ns);
}

}  // namespace
}  // namespace tw2
