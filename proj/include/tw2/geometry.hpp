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

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tw2 {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Rigid transform of a link in some frame. Rotation is kept as a matrix at
/// API boundaries; kinematics composes quaternions internally.
struct LinkPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();

  static LinkPose identity() { return {}; }

  LinkPose compose(const LinkPose& child) const {
    return {rotation * child.rotation, position + rotation * child.position};
  }
  LinkPose inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * position)};
  }
  bool operator==(const LinkPose& other) const {
    return rotation == other.rotation && position == other.position;
  }
};

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// Roll/pitch/yaw with R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct Rpy {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

inline Mat3 from_rpy(const Rpy& e) { return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll); }

inline Rpy to_rpy(const Mat3& r) {
  Rpy e;
  e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  e.roll = std::atan2(r(2, 1), r(2, 2));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  return e;
}

/// Heading of a frame: yaw of its x axis projected on the ground plane.
inline double heading_of(const Mat3& r) { return std::atan2(r(1, 0), r(0, 0)); }

inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Rotation vector (axis * angle) of r.
inline Vec3 rotation_log(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

/// Geodesic angle between two rotations, rad.
inline double geodesic_distance(const Mat3& a, const Mat3& b) {
  double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline bool is_rotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Human positions live on a dyadic grid so that translating a whole frame by
/// a grid-aligned offset is exact in floating point.
inline constexpr double kPositionQuantum = 0x1p-30;

inline double quantize_position(double x) {
  return std::nearbyint(x * 0x1p30) * kPositionQuantum;
}

inline Vec3 quantize_position(const Vec3& p) {
  return {quantize_position(p.x()), quantize_position(p.y()), quantize_position(p.z())};
}

}  // namespace tw2
