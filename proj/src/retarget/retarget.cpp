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


#include "tw2/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace tw2 {

void HumanPoseFrame::set(const std::string& name, const LinkPose& pose, bool present) {
  links_[name] = Entry{{pose.rotation, quantize_position(pose.position)}, present};
}

void HumanPoseFrame::set_present(const std::string& name, bool present) {
  auto it = links_.find(name);
  if (it != links_.end()) it->second.present = present;
}

const LinkPose* HumanPoseFrame::find(std::string_view name) const {
  auto it = links_.find(name);
  if (it == links_.end() || !it->second.present) return nullptr;
  return &it->second.pose;
}

void HumanPoseFrame::translate(const Vec3& offset) {
  const Vec3 t = quantize_position(offset);
  for (auto& [name, entry] : links_) entry.pose.position += t;
}

GraspCommand GraspCommand::make(double alpha, GraspMode mode) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("grasp alpha must be in [0, 1]");
  }
  return {alpha, mode};
}

GraspCommand GraspCommand::from_trigger(double trigger, GraspMode mode) {
  if (std::isnan(trigger)) trigger = 0.0;
  return {std::clamp(trigger, 0.0, 1.0), mode};
}

namespace {

struct RotationTerm {
  int link;
  Mat3 target;
  double sqrt_w;
};

struct PositionTerm {
  int link;
  Vec3 target;  // human point in the human pelvis frame
  double sqrt_w;
};

// Residual terms of one frame. The robot root is placed at the origin with
// the human pelvis orientation, so only pelvis-relative positions enter.
struct Problem {
  const RobotModel& model;
  LinkPose root;
  Mat3 pelvis_rt;
  std::vector<RotationTerm> rotations;
  std::vector<PositionTerm> positions;
  std::vector<std::vector<int>> chains;  // per term, rotations first

  Problem(const RobotModel& m, const HumanPoseFrame& frame) : model(m) {
    const auto& root_link = m.links.front().name;
    const auto human_root = m.human_for(root_link);
    const LinkPose* pelvis = human_root ? frame.find(*human_root) : nullptr;
    if (!pelvis) throw MissingLinkError("frame has no valid pelvis link");
    root.rotation = pelvis->rotation;
    pelvis_rt = pelvis->rotation.transpose();

    for (const auto& [human, robot] : m.mapping) {
      auto it = m.rotation_weights.find(robot);
      const double w = it == m.rotation_weights.end() ? 0.0 : it->second;
      if (w <= 0.0) continue;
      const LinkPose* p = frame.find(human);
      if (!p) throw MissingLinkError("required link '" + human + "' is missing from the frame");
      rotations.push_back({m.link_index(robot), p->rotation, std::sqrt(w)});
    }
    for (const auto& robot : m.position_points()) {
      const auto human = m.human_for(robot);
      const LinkPose* p = frame.find(*human);
      if (!p) throw MissingLinkError("required link '" + *human + "' is missing from the frame");
      const double w = m.position_weights.at(robot);
      positions.push_back({m.link_index(robot), pelvis_rt * (p->position - pelvis->position),
                           std::sqrt(m.solver.lambda_pos * w)});
    }
    for (const auto& t : rotations) chains.push_back(chain_joints(m, t.link));
    for (const auto& t : positions) chains.push_back(chain_joints(m, t.link));
  }

  Eigen::Index rows() const {
    return static_cast<Eigen::Index>(9 * rotations.size() + 3 * positions.size());
  }

  VecX residual(const std::vector<LinkPose>& poses) const {
    VecX r(rows());
    Eigen::Index row = 0;
    for (const auto& t : rotations) {
      const Mat3 d = t.target - poses[t.link].rotation;
      for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 3; ++k) r(row++) = t.sqrt_w * d(k, c);
      }
    }
    for (const auto& t : positions) {
      r.segment<3>(row) = t.sqrt_w * (t.target - pelvis_rt * poses[t.link].position);
      row += 3;
    }
    return r;
  }

  MatX jacobian(const std::vector<LinkPose>& poses) const {
    MatX jac = MatX::Zero(rows(), static_cast<Eigen::Index>(model.dof()));
    Eigen::Index row = 0;
    std::size_t term = 0;
    for (const auto& t : rotations) {
      const Mat3& rot = poses[t.link].rotation;
      for (int j : chains[term]) {
        const Vec3 axis = poses[model.joints[j].child_link].rotation * model.joints[j].axis;
        const Mat3 d = -t.sqrt_w * (skew(axis) * rot);
        for (int c = 0; c < 3; ++c) {
          for (int k = 0; k < 3; ++k) jac(row + 3 * c + k, j) = d(k, c);
        }
      }
      row += 9;
      ++term;
    }
    for (const auto& t : positions) {
      const Vec3& p = poses[t.link].position;
      for (int j : chains[term]) {
        const auto& origin = poses[model.joints[j].child_link];
        const Vec3 axis = origin.rotation * model.joints[j].axis;
        jac.block<3, 1>(row, j) = -t.sqrt_w * (pelvis_rt * axis.cross(p - origin.position));
      }
      row += 3;
      ++term;
    }
    return jac;
  }

  double objective(std::span<const double> q, VecX* r_out = nullptr) const {
    VecX r = residual(link_poses(model, q, root));
    const double f = r.squaredNorm();
    if (r_out) *r_out = std::move(r);
    return f;
  }
};

// Angle about unit axis k that best rotates u onto v.
double rotate_onto(const Vec3& k, const Vec3& u, const Vec3& v) {
  return std::atan2(k.dot(u.cross(v)), u.dot(v) - k.dot(u) * k.dot(v));
}

Mat3 axis_rotation(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

Vec3 any_perpendicular(const Vec3& k) {
  const Vec3 seed = std::abs(k.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return k.cross(seed).normalized();
}

// Candidate solutions of m = Rot(axes[0], q0) * ... for one to three world
// axes. Empty when the axes are degenerate for the closed form.
std::vector<std::vector<double>> decompose(const std::vector<Vec3>& axes, const Mat3& m) {
  if (axes.size() == 1) {
    const Vec3& a = axes[0];
    return {{std::atan2(-(skew(a) * m).trace(), m.trace() - a.dot(m * a))}};
  }
  if (axes.size() == 2) {
    const Vec3& a = axes[0];
    const Vec3& b = axes[1];
    if (std::abs(a.dot(b)) > 1.0 - 1e-9) return {};
    const double q0 = rotate_onto(a, b, m * b);
    const Vec3 p = any_perpendicular(b);
    return {{q0, rotate_onto(b, p, axis_rotation(a, q0).transpose() * m * p)}};
  }
  if (axes.size() != 3) return {};
  const Vec3& a = axes[0];
  const Vec3& b = axes[1];
  const Vec3& c = axes[2];
  // a' m c = a' Rot(b, q1) c fixes the middle angle up to two branches.
  const double ca = a.dot(c) - a.dot(b) * b.dot(c);
  const double sa = a.dot(b.cross(c));
  const double k = a.dot(b) * b.dot(c);
  const double rho = std::hypot(ca, sa);
  if (rho < 1e-9) return {};
  const double phi = std::atan2(sa, ca);
  const double spread = std::acos(std::clamp((a.dot(m * c) - k) / rho, -1.0, 1.0));
  std::vector<std::vector<double>> out;
  for (double q1 : {phi + spread, phi - spread}) {
    q1 = wrap_angle(q1);
    const double q0 = rotate_onto(a, axis_rotation(b, q1) * c, m * c);
    const Mat3 rest = (axis_rotation(a, q0) * axis_rotation(b, q1)).transpose() * m;
    const Vec3 p = any_perpendicular(c);
    out.push_back({q0, q1, rotate_onto(c, p, rest * p)});
  }
  return out;
}

// Best single-joint alignment of `joint` to a rotation target on a descendant.
double align_joint(const RobotModel& model, std::vector<double>& q, const LinkPose& root,
                   int j, int link, const Mat3& target) {
  const auto& joint = model.joints[j];
  q[j] = 0.0;
  const auto poses = link_poses(model, q, root);
  const Vec3 axis = poses[joint.child_link].rotation * joint.axis;
  const Mat3 m = target * poses[link].rotation.transpose();
  const double x = decompose({axis}, m).front().front();
  if (x >= joint.lower && x <= joint.upper) return x;
  auto score = [&](double v) { return (axis_rotation(axis, v) - m).squaredNorm(); };
  return score(joint.lower) <= score(joint.upper) ? joint.lower : joint.upper;
}

// Stage 1: link-rotation consistency. Joints between consecutive
// rotation-constrained links form a group solved in closed form (up to three
// joints); longer groups fall back to per-joint alignment sweeps.
std::vector<double> stage1(const RobotModel& model, const Problem& problem) {
  std::vector<double> q(model.dof(), 0.0);
  clamp_to_limits(model, q);
  std::vector<const RotationTerm*> terms;
  for (const auto& t : problem.rotations) terms.push_back(&t);
  std::sort(terms.begin(), terms.end(),
            [](const RotationTerm* x, const RotationTerm* y) { return x->link < y->link; });
  std::vector<char> assigned(model.dof(), 0);

  for (const RotationTerm* t : terms) {
    std::vector<int> group;
    for (int j : chain_joints(model, t->link)) {
      if (!assigned[j]) group.push_back(j);
    }
    if (group.empty()) continue;
    for (int j : group) {
      assigned[j] = 1;
      q[j] = 0.0;
    }
    const auto poses = link_poses(model, q, problem.root);
    std::vector<Vec3> axes;
    for (int j : group) {
      axes.push_back(poses[model.joints[j].child_link].rotation * model.joints[j].axis);
    }
    const Mat3 m = t->target * poses[t->link].rotation.transpose();
    const auto candidates = decompose(axes, m);
    if (candidates.empty()) {
      for (int sweep = 0; sweep < model.solver.stage1_sweeps; ++sweep) {
        for (int j : group) q[j] = align_joint(model, q, problem.root, j, t->link, t->target);
      }
      continue;
    }
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<double> best;
    for (const auto& cand : candidates) {
      Mat3 r = Mat3::Identity();
      std::vector<double> v(group.size());
      for (std::size_t i = 0; i < group.size(); ++i) {
        const auto& jt = model.joints[group[i]];
        v[i] = std::clamp(wrap_angle(cand[i]), jt.lower, jt.upper);
        r = r * axis_rotation(axes[i], v[i]);
      }
      const double err = (r - m).squaredNorm();
      if (err < best_err) {
        best_err = err;
        best = std::move(v);
      }
    }
    for (std::size_t i = 0; i < group.size(); ++i) q[group[i]] = best[i];
  }
  return q;
}

}  // namespace

double retarget_objective(const RobotModel& model, const HumanPoseFrame& frame,
                          std::span<const double> q) {
  return Problem(model, frame).objective(q);
}

std::vector<double> initial_guess(const RobotModel& model, const HumanPoseFrame& frame) {
  return stage1(model, Problem(model, frame));
}

namespace {

struct LmOutcome {
  std::vector<double> q;
  double f = 0.0;
  int iterations = 0;
  bool degraded = false;
  SolveTrace trace;
};

// Projected Levenberg-Marquardt. Joints resting on a limit with the gradient
// pointing outward are held fixed for the step.
LmOutcome solve_from(const RobotModel& model, const Problem& problem, std::vector<double> q,
                     bool record) {
  const auto& opt = model.solver;
  const std::size_t n = model.dof();
  LmOutcome out;
  VecX r;
  double f = problem.objective(q, &r);
  if (record) {
    out.trace.iterates.push_back(q);
    out.trace.objectives.push_back(f);
  }
  if (!std::isfinite(f)) {
    out.q = std::move(q);
    out.f = f;
    out.degraded = true;
    return out;
  }

  double mu = opt.initial_damping;
  int iterations = 0;
  bool done = false;
  std::vector<double> candidate(n);
  while (!done && iterations < opt.max_iterations) {
    const auto poses = link_poses(model, q, problem.root);
    const MatX jac = problem.jacobian(poses);
    MatX jtj = jac.transpose() * jac;
    VecX grad = jac.transpose() * r;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& jt = model.joints[i];
      const auto k = static_cast<Eigen::Index>(i);
      const bool at_lower = q[i] <= jt.lower && grad(k) > 0.0;
      const bool at_upper = q[i] >= jt.upper && grad(k) < 0.0;
      if (at_lower || at_upper) {
        jtj.row(k).setZero();
        jtj.col(k).setZero();
        jtj(k, k) = 1.0;
        grad(k) = 0.0;
      }
    }

    while (iterations < opt.max_iterations) {
      ++iterations;
      MatX damped = jtj;
      damped.diagonal().array() += mu;
      const VecX delta = damped.ldlt().solve(-grad);

      double step = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& jt = model.joints[i];
        candidate[i] = std::clamp(q[i] + delta(static_cast<Eigen::Index>(i)), jt.lower, jt.upper);
        step = std::max(step, std::abs(candidate[i] - q[i]));
      }
      if (step < opt.step_tolerance) {
        done = true;
        break;
      }
      VecX r_new;
      const double f_new = problem.objective(candidate, &r_new);
      if (std::isfinite(f_new) && f_new < f) {
        const double decrease = f - f_new;
        q = candidate;
        f = f_new;
        r = std::move(r_new);
        mu = std::max(mu * 0.3, 1e-12);
        if (record) {
          out.trace.iterates.push_back(q);
          out.trace.objectives.push_back(f);
        }
        if (decrease < opt.decrease_tolerance) done = true;
        break;
      }
      if (!std::isfinite(f_new)) out.degraded = true;
      mu *= 10.0;
      if (mu > 1e12) {
        done = true;
        break;
      }
    }
  }
  out.q = std::move(q);
  out.f = f;
  out.iterations = iterations;
  return out;
}

// Cold-start seeds: the stage-1 guess, the zero pose and the mid-range pose.
std::vector<std::vector<double>> cold_seeds(const RobotModel& model, const Problem& problem) {
  std::vector<std::vector<double>> seeds;
  seeds.push_back(stage1(model, problem));
  std::vector<double> zero(model.dof(), 0.0);
  clamp_to_limits(model, zero);
  seeds.push_back(std::move(zero));
  std::vector<double> mid(model.dof());
  for (std::size_t i = 0; i < mid.size(); ++i) {
    mid[i] = 0.5 * (model.joints[i].lower + model.joints[i].upper);
  }
  seeds.push_back(std::move(mid));
  return seeds;
}

}  // namespace

RetargetResult retarget_body(const RobotModel& model, const HumanPoseFrame& frame,
                             std::optional<std::span<const double>> warm_start,
                             SolveTrace* trace) {
  const Problem problem(model, frame);
  const std::size_t n = model.dof();

  std::vector<std::vector<double>> seeds;
  if (warm_start) {
    if (warm_start->size() != n) throw DimensionError("warm start length does not match model");
    std::vector<double> q(warm_start->begin(), warm_start->end());
    clamp_to_limits(model, q);
    seeds.push_back(std::move(q));
  } else {
    seeds = cold_seeds(model, problem);
  }

  std::optional<LmOutcome> best;
  for (auto& seed : seeds) {
    LmOutcome run = solve_from(model, problem, std::move(seed), trace != nullptr);
    if (!best || (std::isfinite(run.f) && !(run.f >= best->f))) best = std::move(run);
  }

  RetargetResult result;
  const auto* root = frame.find(*model.human_for(model.links.front().name));
  result.root = {root->rotation, root->position};
  result.q = std::move(best->q);
  result.residual = best->f;
  result.iterations = best->iterations;
  result.degraded = best->degraded;
  if (trace) *trace = std::move(best->trace);
  return result;
}

std::vector<double> retarget_hand(const GripperPoses& poses, const GraspCommand& cmd) {
  const std::size_t n = poses.q_open.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (1.0 - cmd.alpha) * poses.q_open[i] + cmd.alpha * poses.q_close[i];
  }
  return out;
}

NeckAngles extract_neck_angles(const Mat3& r_rel) {
  NeckAngles out;
  const double r31 = r_rel(2, 0);
  out.yaw = std::atan2(r_rel(1, 0), r_rel(0, 0));
  out.pitch = std::asin(std::clamp(-r31, -1.0, 1.0));
  out.degenerate = std::abs(r31) >= 1.0 - 1e-12;
  return out;
}

NeckAngles retarget_neck(const RobotModel& model, const HumanPoseFrame& frame) {
  const LinkPose* head = frame.find(model.neck.head);
  const LinkPose* spine = frame.find(model.neck.spine);
  if (!head) throw MissingLinkError("frame has no valid '" + model.neck.head + "' link");
  if (!spine) throw MissingLinkError("frame has no valid '" + model.neck.spine + "' link");
  NeckAngles out = extract_neck_angles(spine->rotation.transpose() * head->rotation);
  out.yaw = std::clamp(out.yaw, model.neck.yaw_lower, model.neck.yaw_upper);
  out.pitch = std::clamp(out.pitch, model.neck.pitch_lower, model.neck.pitch_upper);
  return out;
}

RetargetResult retarget_frame(const RobotModel& model, const HumanPoseFrame& frame,
                              const GraspCommand& left, const GraspCommand& right,
                              std::optional<std::span<const double>> warm_start) {
  RetargetResult result = retarget_body(model, frame, warm_start);
  result.neck = retarget_neck(model, frame);
  result.left_hand = retarget_hand(model.left_hand.poses(left.mode), left);
  result.right_hand = retarget_hand(model.right_hand.poses(right.mode), right);
  return result;
}

RetargetResult RetargetSession::process(const HumanPoseFrame& frame, const GraspCommand& left,
                                        const GraspCommand& right) {
  std::optional<std::span<const double>> warm;
  if (warm_) warm = std::span<const double>(*warm_);
  RetargetResult result = retarget_frame(model_, frame, left, right, warm);
  if (!result.degraded) warm_ = result.q;
  return result;
}

}  // namespace tw2
