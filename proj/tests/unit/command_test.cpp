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


#include "tw2/command.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

namespace tw2 {
namespace {

constexpr double kPi = std::numbers::pi;

const RobotModel& demo() {
  static const RobotModel model = load_model(demo_model_path());
  return model;
}

RobotPoseSample sample(std::int64_t t_ns, double x, double y, double yaw, double z = 0.75) {
  RobotPoseSample s;
  s.timestamp_ns = t_ns;
  s.root = {rot_z(yaw), Vec3(x, y, z)};
  s.q.assign(demo().dof(), 0.1);
  s.left_hand.assign(7, 0.0);
  s.right_hand.assign(7, 0.0);
  return s;
}

CommandVector random_command(const Layout& layout, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> flat(layout.command_dim());
  for (double& v : flat) v = n(rng);
  return unflatten_command(layout, flat, 42);
}

TEST(Layout, DemoModelHas51CommandDims) {
  const auto layout = Layout::for_model(demo());
  EXPECT_EQ(layout.command_dim(), 51u);
  EXPECT_EQ(layout.command_names().size(), 51u);
  EXPECT_EQ(layout.command_names()[6], demo().joints[0].name);
  EXPECT_EQ(layout.state_dim(), 7u + 2u * 45u);
  EXPECT_EQ(layout.state_names().size(), layout.state_dim());
}

TEST(Layout, JsonRoundTripAndVersionCheck) {
  const auto layout = Layout::for_model(demo());
  EXPECT_EQ(Layout::from_json(layout.to_json()), layout);
  auto j = layout.to_json();
  j["version"] = 99;
  EXPECT_THROW(Layout::from_json(j), ProtocolError);
  j.erase("version");
  EXPECT_THROW(Layout::from_json(j), ProtocolError);
}

TEST(Flatten, CommandRoundTripIsBitExact) {
  const auto layout = Layout::for_model(demo());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto cmd = random_command(layout, rng);
    const auto flat = flatten(layout, cmd);
    ASSERT_EQ(flat.size(), 51u);
    EXPECT_EQ(unflatten_command(layout, flat, cmd.timestamp_ns), cmd);
    EXPECT_EQ(flatten(layout, unflatten_command(layout, flat)), flat);
  }
}

TEST(Flatten, StateRoundTripIsBitExact) {
  const auto layout = Layout::for_model(demo());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> flat(layout.state_dim());
  for (double& v : flat) v = n(rng);
  const auto state = unflatten_state(layout, flat, 7);
  EXPECT_EQ(flatten(layout, state), flat);
  EXPECT_EQ(unflatten_state(layout, flatten(layout, state), 7), state);
}

TEST(Flatten, WrongLengthThrows) {
  const auto layout = Layout::for_model(demo());
  const std::vector<double> short_vec(50, 0.0);
  EXPECT_THROW(unflatten_command(layout, short_vec), DimensionError);
  EXPECT_THROW(unflatten_state(layout, short_vec), DimensionError);
  CommandVector cmd;
  EXPECT_THROW(flatten(layout, cmd), DimensionError);
}

TEST(DeriveCommand, ConstantForwardMotion) {
  const auto a = sample(0, 1.0, 2.0, 0.0);
  const auto b = sample(20'000'000, 1.01, 2.0, 0.0);
  const auto cmd = derive_command(a, b, 0.02);
  EXPECT_NEAR(cmd.vx, 0.5, 1e-12);
  EXPECT_NEAR(cmd.vy, 0.0, 1e-12);
  EXPECT_NEAR(cmd.yaw_rate, 0.0, 1e-12);
}

TEST(DeriveCommand, HeadingRotatesDisplacement) {
  const auto a = sample(0, 0.0, 0.0, kPi / 2);
  const auto b = sample(20'000'000, 0.01, 0.0, kPi / 2);
  const auto cmd = derive_command(a, b, 0.02);
  EXPECT_NEAR(cmd.vx, 0.0, 1e-12);
  EXPECT_NEAR(cmd.vy, -0.5, 1e-12);
}

TEST(DeriveCommand, StationaryPoseGivesZeroVelocity) {
  auto a = sample(0, 0.3, -0.2, 0.4, 0.71);
  a.root.rotation = from_rpy({0.05, -0.1, 0.4});
  const auto cmd = derive_command(a, a, 0.02);
  EXPECT_EQ(cmd.vx, 0.0);
  EXPECT_EQ(cmd.vy, 0.0);
  EXPECT_EQ(cmd.yaw_rate, 0.0);
  EXPECT_EQ(cmd.z, 0.71);
  EXPECT_NEAR(cmd.roll, 0.05, 1e-12);
  EXPECT_NEAR(cmd.pitch, -0.1, 1e-12);
  EXPECT_EQ(cmd.q_ref, a.q);
}

TEST(DeriveCommand, RejectsBadInput) {
  const auto a = sample(0, 0.0, 0.0, 0.0);
  EXPECT_THROW(derive_command(a, a, 0.0), std::invalid_argument);
  EXPECT_THROW(derive_command(a, a, -0.1), std::invalid_argument);
  auto b = a;
  b.root.position.x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(derive_command(a, b, 0.02), ValidationError);
}

TEST(DeriveCommand, HeadingFrameInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RobotPoseSample> path;
  double x = 0.0, y = 0.0, yaw = 0.2;
  for (int k = 0; k < 200; ++k) {
    path.push_back(sample(k * 20'000'000LL, x, y, yaw));
    x += 0.01 * std::cos(yaw) + 0.002 * u(rng);
    y += 0.01 * std::sin(yaw) + 0.002 * u(rng);
    yaw += 0.02 * u(rng);
  }
  for (double offset : {0.7, -2.5, 3.0}) {
    const Mat3 rz = rot_z(offset);
    for (std::size_t k = 1; k < path.size(); ++k) {
      auto a = path[k - 1];
      auto b = path[k];
      const auto base = derive_command(a, b, 0.02);
      a.root = {rz * a.root.rotation, rz * a.root.position};
      b.root = {rz * b.root.rotation, rz * b.root.position};
      const auto turned = derive_command(a, b, 0.02);
      EXPECT_NEAR(turned.vx, base.vx, 1e-10);
      EXPECT_NEAR(turned.vy, base.vy, 1e-10);
      EXPECT_NEAR(turned.yaw_rate, base.yaw_rate, 1e-10);
    }
  }
}

TEST(DeriveCommand, YawRateContinuousAcrossSeam) {
  const double rate = 1.5;
  const double dt = 0.02;
  double yaw = kPi - 0.2;
  for (int k = 0; k < 30; ++k) {
    const auto a = sample(0, 0.0, 0.0, yaw);
    const double next = wrap_angle(yaw + rate * dt);
    const auto b = sample(20'000'000, 0.0, 0.0, next);
    const auto cmd = derive_command(a, b, dt);
    EXPECT_LE(std::abs(cmd.yaw_rate), rate + 1e-9);
    EXPECT_NEAR(cmd.yaw_rate, rate, 1e-9);
    yaw = next;
  }
}

TEST(CommandDeriver, SmoothsTowardConstantVelocity) {
  CommandDeriver deriver(0.2);
  CommandVector cmd;
  for (int k = 0; k < 40; ++k) cmd = deriver.push(sample(k * 10'000'000LL, 0.005 * k, 0.0, 0.0));
  EXPECT_NEAR(cmd.vx, 0.5, 1e-9);
  deriver.reset();
  cmd = deriver.push(sample(0, 5.0, 0.0, 0.0));
  EXPECT_EQ(cmd.vx, 0.0);
  EXPECT_THROW(deriver.push(sample(0, 5.0, 0.0, 0.0)), std::invalid_argument);
}

TEST(Normalization, IdentityStats) {
  NormalizationStats s{std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)};
  const std::vector<double> x{1.0, -2.0, 3.5, 0.0, 1e6};
  EXPECT_EQ(normalize(x, s), x);
  EXPECT_EQ(denormalize(x, s), x);
}

TEST(Normalization, RoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  NormalizationStats s;
  std::vector<double> x(51);
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.offset.push_back(n(rng));
    s.scale.push_back(0.01 + std::abs(n(rng)));
    x[i] = n(rng);
  }
  const auto back = denormalize(normalize(x, s), s);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
}

TEST(Normalization, RejectsBadStats) {
  NormalizationStats s{{0.0, 0.0}, {1.0, 0.0}};
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(normalize(x, s), ValidationError);
  s.scale[1] = -1.0;
  EXPECT_THROW(denormalize(x, s), ValidationError);
  s.scale[1] = 1.0;
  EXPECT_THROW(normalize(std::vector<double>{1.0}, s), DimensionError);
}

TEST(Normalization, ComputedStatsWhitenTheData) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> rows(500, std::vector<double>(6));
  for (auto& r : rows) {
    r[0] = 3.0 + 0.2 * n(rng);
    r[1] = -1.0 + 10.0 * n(rng);
    r[2] = 0.75;  // constant
    r[3] = 1e-3 * n(rng);
    r[4] = n(rng) * n(rng);
    r[5] = 100.0 + n(rng);
  }
  const auto stats = compute_stats(rows);
  EXPECT_EQ(stats.scale[2], 1.0);
  std::vector<double> mean(6, 0.0), var(6, 0.0);
  std::vector<std::vector<double>> z;
  for (const auto& r : rows) z.push_back(normalize(r, stats));
  for (const auto& r : z) {
    for (int i = 0; i < 6; ++i) mean[i] += r[i] / 500.0;
  }
  for (const auto& r : z) {
    for (int i = 0; i < 6; ++i) var[i] += (r[i] - mean[i]) * (r[i] - mean[i]) / 500.0;
  }
  for (int i = 0; i < 6; ++i) {
    EXPECT_LT(std::abs(mean[i]), 1e-9) << i;
    if (i != 2) EXPECT_NEAR(std::sqrt(var[i]), 1.0, 1e-9) << i;
  }
}

TEST(Normalization, StatsJsonRoundTrip) {
  NormalizationStats s{{0.1, -3.0}, {0.5, 2.0}};
  EXPECT_EQ(NormalizationStats::from_json(s.to_json()), s);
}

TEST(ProprioNoise, ZeroFractionIsIdentity) {
  NormalizationStats s{{0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}};
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_EQ(add_proprio_noise(x, &s, 0.0, 9), x);
  EXPECT_THROW(add_proprio_noise(x, nullptr, 0.1, 9), std::invalid_argument);
  EXPECT_THROW(add_proprio_noise(x, &s, -0.1, 9), std::invalid_argument);
}

TEST(ProprioNoise, SeededAndReproducible) {
  NormalizationStats s{{0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}};
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_EQ(add_proprio_noise(x, &s, 0.1, 9), add_proprio_noise(x, &s, 0.1, 9));
  EXPECT_NE(add_proprio_noise(x, &s, 0.1, 9), add_proprio_noise(x, &s, 0.1, 10));
}

TEST(ProprioNoise, EmpiricalStdevMatches) {
  NormalizationStats s{{0.0}, {2.5}};
  ProprioNoise noise(s, 0.1, 123);
  const std::vector<double> x{4.0};
  double sum = 0.0, sum2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double d = noise.apply(x)[0] - 4.0;
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(sd, 0.25, 0.02 * 0.25);
}

}  // namespace
}  // namespace tw2
