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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "tw2/errors.hpp"

namespace tw2 {
namespace {

CommandVector pose(double q, std::int64_t ts = 0) {
  CommandVector c;
  c.timestamp_ns = ts;
  c.vx = 0.3;
  c.yaw_rate = 0.1;
  c.z = 0.74;
  c.q_ref.assign(4, q);
  c.left_hand.assign(2, q);
  c.right_hand.assign(2, q);
  return c;
}

constexpr Mode kAll[] = {Mode::kIdle, Mode::kActive, Mode::kPaused, Mode::kInterpolating,
                         Mode::kStopped};

TEST(SessionRules, LegalTransitions) {
  EXPECT_EQ(next_mode(Mode::kIdle, CtrlCode::kStart), Mode::kActive);
  EXPECT_EQ(next_mode(Mode::kActive, CtrlCode::kPause), Mode::kPaused);
  EXPECT_EQ(next_mode(Mode::kPaused, CtrlCode::kResume), Mode::kInterpolating);
  EXPECT_EQ(next_mode(Mode::kInterpolating, CtrlCode::kInterpDone), Mode::kActive);
  EXPECT_EQ(next_mode(Mode::kInterpolating, CtrlCode::kPause), Mode::kPaused);
  EXPECT_FALSE(next_mode(Mode::kIdle, CtrlCode::kResume));
  EXPECT_FALSE(next_mode(Mode::kActive, CtrlCode::kStart));
  EXPECT_FALSE(next_mode(Mode::kActive, CtrlCode::kResume));
  EXPECT_FALSE(next_mode(Mode::kIdle, CtrlCode::kMarkFailure));
}

TEST(SessionRules, EstopFromAnyMode) {
  for (Mode m : kAll) EXPECT_EQ(next_mode(m, CtrlCode::kEstop), Mode::kStopped);
}

TEST(SessionRules, StoppedIsTerminal) {
  for (auto code : {CtrlCode::kStart, CtrlCode::kPause, CtrlCode::kResume, CtrlCode::kStop,
                    CtrlCode::kInterpDone}) {
    EXPECT_FALSE(next_mode(Mode::kStopped, code));
  }
}

TEST(SessionRules, NamesAndBytes) {
  for (auto code : {CtrlCode::kStart, CtrlCode::kPause, CtrlCode::kResume, CtrlCode::kStop,
                    CtrlCode::kEstop, CtrlCode::kInterpDone, CtrlCode::kMarkEpisodeStart,
                    CtrlCode::kMarkEpisodeEnd, CtrlCode::kMarkFailure}) {
    EXPECT_EQ(parse_ctrl(ctrl_name(code)), code);
    EXPECT_EQ(ctrl_from_byte(static_cast<std::uint8_t>(code)), code);
    EXPECT_NE(is_mark(code), is_transition(code));
  }
  EXPECT_THROW(ctrl_from_byte(0), ProtocolError);
  EXPECT_THROW(parse_ctrl("jump"), std::invalid_argument);
}

TEST(SessionController, TwoStartsSecondRejected) {
  SessionController s(1.0, 50.0);
  EXPECT_TRUE(s.apply(CtrlCode::kStart));
  EXPECT_FALSE(s.apply(CtrlCode::kStart));
  EXPECT_EQ(s.mode(), Mode::kActive);
}

TEST(SessionController, IllegalLeavesStateUnchanged) {
  SessionController s(1.0, 50.0);
  EXPECT_FALSE(s.apply(CtrlCode::kResume));
  EXPECT_EQ(s.mode(), Mode::kIdle);
  EXPECT_FALSE(s.tick(pose(0.0)));
}

TEST(SessionController, ResumeBlendsFiftyStepsOfOneCentiradian) {
  SessionController s(1.0, 50.0);
  s.apply(CtrlCode::kStart);
  s.tick(pose(0.0));
  s.apply(CtrlCode::kPause);
  s.tick(pose(0.2));
  s.apply(CtrlCode::kResume);
  EXPECT_EQ(s.interp_steps(), 50);

  double prev = 0.0;
  double max_delta = 0.0;
  int emitted = 0;
  while (s.mode() == Mode::kInterpolating) {
    const auto c = s.tick(pose(0.5));
    ASSERT_TRUE(c);
    ++emitted;
    for (double q : c->q_ref) max_delta = std::max(max_delta, std::abs(q - prev));
    prev = c->q_ref[0];
  }
  EXPECT_EQ(emitted, 50);
  EXPECT_NEAR(max_delta, 0.01, 1e-12);
  EXPECT_EQ(prev, 0.5);
  EXPECT_TRUE(s.interp_finished());
  EXPECT_FALSE(s.interp_finished());
  EXPECT_EQ(s.mode(), Mode::kActive);
}

TEST(SessionController, ResumeContinuityBound) {
  // Per-step change stays within gap / (duration * rate) + 1e-9 for a moving target.
  SessionController s(0.5, 30.0);
  s.apply(CtrlCode::kStart);
  s.tick(pose(-0.3));
  s.apply(CtrlCode::kPause);
  s.apply(CtrlCode::kResume);
  CommandVector prev = pose(-0.3);
  for (int k = 0; s.mode() == Mode::kInterpolating; ++k) {
    const double target = 0.4;
    const auto c = s.tick(pose(target));
    const double bound = std::abs(target + 0.3) / (0.5 * 30.0) + 1e-9;
    for (std::size_t i = 0; i < c->q_ref.size(); ++i) {
      EXPECT_LE(std::abs(c->q_ref[i] - prev.q_ref[i]), bound);
    }
    prev = *c;
  }
}

TEST(SessionController, PausedOutputIsBitConstant) {
  SessionController s(1.0, 50.0);
  s.apply(CtrlCode::kStart);
  s.tick(pose(0.123456789));
  s.apply(CtrlCode::kPause);
  const auto first = s.tick(pose(1.0, 1));
  for (int k = 2; k < 200; ++k) {
    const auto c = s.tick(pose(std::sin(k), k));
    EXPECT_EQ(c->q_ref, first->q_ref);
    EXPECT_EQ(c->left_hand, first->left_hand);
    EXPECT_EQ(c->vx, 0.0);
    EXPECT_EQ(c->yaw_rate, 0.0);
    EXPECT_EQ(c->timestamp_ns, k);
  }
  EXPECT_EQ(first->q_ref[0], 0.123456789);
}

TEST(SessionController, PauseMidBlendFreezesBlendedPose) {
  SessionController s(1.0, 10.0);
  s.apply(CtrlCode::kStart);
  s.tick(pose(0.0));
  s.apply(CtrlCode::kPause);
  s.apply(CtrlCode::kResume);
  for (int k = 0; k < 3; ++k) s.tick(pose(1.0));
  s.apply(CtrlCode::kPause);
  EXPECT_NEAR(s.tick(pose(1.0))->q_ref[0], 0.3, 1e-12);
}

TEST(SessionController, EstopHoldsLastPoseWithZeroVelocity) {
  SessionController s(1.0, 50.0);
  EXPECT_FALSE(s.hold_command(0));
  s.apply(CtrlCode::kStart);
  s.tick(pose(0.7));
  EXPECT_TRUE(s.apply(CtrlCode::kEstop));
  EXPECT_EQ(s.mode(), Mode::kStopped);
  EXPECT_FALSE(s.tick(pose(0.1)));
  const auto hold = s.hold_command(99);
  ASSERT_TRUE(hold);
  EXPECT_EQ(hold->q_ref, pose(0.7).q_ref);
  EXPECT_EQ(hold->vx, 0.0);
  EXPECT_EQ(hold->yaw_rate, 0.0);
  EXPECT_EQ(hold->timestamp_ns, 99);
}

TEST(SessionController, RejectsBadConfig) {
  EXPECT_THROW(SessionController(-1.0, 50.0), std::invalid_argument);
  EXPECT_THROW(SessionController(1.0, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace tw2
