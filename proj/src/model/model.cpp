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


#include "tw2/model.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace tw2 {
namespace {

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

Vec3 read_vec3(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() != 3) {
    throw ConfigError(what + ": expected a 3-element list");
  }
  return {node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
}

std::pair<double, double> read_range(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() != 2) {
    throw ConfigError(what + ": expected [lower, upper]");
  }
  return {node[0].as<double>(), node[1].as<double>()};
}

std::vector<double> read_doubles(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence()) throw ConfigError(what + ": expected a list");
  std::vector<double> out;
  for (const auto& v : node) out.push_back(v.as<double>());
  return out;
}

std::vector<std::string> read_strings(const YAML::Node& node, const std::string& what) {
  if (!node) return {};
  if (!node.IsSequence()) throw ConfigError(what + ": expected a list");
  std::vector<std::string> out;
  for (const auto& v : node) out.push_back(v.as<std::string>());
  return out;
}

struct RawLink {
  std::string name;
  std::string parent;
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
};

// Orders links so every parent precedes its children, keeping document order
// among siblings. Detects unknown parents, multiple roots and cycles.
std::vector<RawLink> sort_links(const std::vector<RawLink>& raw) {
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!by_name.emplace(raw[i].name, i).second) {
      throw ValidationError("link '" + raw[i].name + "' is defined twice");
    }
  }
  int roots = 0;
  for (const auto& l : raw) {
    if (l.parent.empty()) {
      ++roots;
    } else if (!by_name.contains(l.parent)) {
      throw ValidationError("link '" + l.name + "' has unknown parent '" + l.parent + "'");
    }
  }
  if (roots != 1) {
    throw ValidationError("model must have exactly one root link, found " + std::to_string(roots));
  }

  std::vector<RawLink> out;
  std::set<std::string> placed;
  while (out.size() < raw.size()) {
    bool progress = false;
    for (const auto& l : raw) {
      if (placed.contains(l.name)) continue;
      if (l.parent.empty() || placed.contains(l.parent)) {
        out.push_back(l);
        placed.insert(l.name);
        progress = true;
      }
    }
    if (!progress) {
      for (const auto& l : raw) {
        if (!placed.contains(l.name)) {
          throw ValidationError("link '" + l.name + "' is part of a cycle");
        }
      }
    }
  }
  return out;
}

HandConfig read_hand(const YAML::Node& node, const std::string& side) {
  HandConfig hand;
  const std::string where = "hands." + side;
  if (!node) return hand;
  hand.joints = read_strings(node["joints"], where + ".joints");
  const auto limits = node["limits"];
  if (limits) {
    for (std::size_t i = 0; i < limits.size(); ++i) {
      auto [lo, hi] = read_range(limits[i], where + ".limits");
      hand.lower.push_back(lo);
      hand.upper.push_back(hi);
    }
  }
  auto read_mode = [&](const char* mode) {
    GripperPoses p;
    const auto m = node[mode];
    if (!m) throw ConfigError(where + ": missing '" + mode + "' poses");
    p.q_open = read_doubles(m["open"], where + "." + mode + ".open");
    p.q_close = read_doubles(m["close"], where + "." + mode + ".close");
    return p;
  };
  hand.power = read_mode("power");
  hand.pinch = read_mode("pinch");
  return hand;
}

void validate_hand(const HandConfig& hand, const std::string& side) {
  const std::size_t n = hand.joints.size();
  if (hand.lower.size() != n) {
    throw ValidationError("hand '" + side + "': limits count does not match joints");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(hand.lower[i] < hand.upper[i])) {
      throw ValidationError("hand joint '" + hand.joints[i] + "': lower limit must be below upper");
    }
  }
  for (const auto* mode : {&hand.power, &hand.pinch}) {
    for (const auto* v : {&mode->q_open, &mode->q_close}) {
      if (v->size() != n) {
        throw ValidationError("hand '" + side + "': gripper pose length does not match joints");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if ((*v)[i] < hand.lower[i] || (*v)[i] > hand.upper[i]) {
          throw ValidationError("hand joint '" + hand.joints[i] + "': gripper pose outside limits");
        }
      }
    }
  }
}

}  // namespace

int RobotModel::link_index(std::string_view n) const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (links[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

int RobotModel::joint_index(std::string_view n) const {
  for (std::size_t i = 0; i < joints.size(); ++i) {
    if (joints[i].name == n) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> RobotModel::joint_names() const {
  std::vector<std::string> out;
  out.reserve(joints.size());
  for (const auto& j : joints) out.push_back(j.name);
  return out;
}

std::vector<std::string> RobotModel::position_points() const {
  std::vector<std::string> out;
  for (const auto& l : links) {
    auto it = position_weights.find(l.name);
    if (it == position_weights.end() || it->second <= 0.0) continue;
    if (l.parent < 0 && !solver.pelvis_position) continue;
    out.push_back(l.name);
  }
  return out;
}

std::optional<std::string> RobotModel::human_for(std::string_view robot_link) const {
  for (const auto& [human, robot] : mapping) {
    if (robot == robot_link) return human;
  }
  return std::nullopt;
}

RobotModel parse_model(std::string_view text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("model config parse error: ") + e.what());
  }
  if (!doc.IsMap()) throw ConfigError("model config: top level must be a mapping");

  RobotModel model;
  try {
    model.name = doc["name"] ? doc["name"].as<std::string>() : "robot";

    std::vector<RawLink> raw;
    const auto links = doc["links"];
    if (!links || !links.IsSequence()) throw ConfigError("model config: missing 'links' list");
    for (const auto& n : links) {
      RawLink l;
      if (!n["name"]) throw ConfigError("links: entry without a name");
      l.name = n["name"].as<std::string>();
      if (n["parent"]) l.parent = n["parent"].as<std::string>();
      if (n["xyz"]) l.xyz = read_vec3(n["xyz"], "link '" + l.name + "' xyz");
      if (n["rpy"]) l.rpy = read_vec3(n["rpy"], "link '" + l.name + "' rpy");
      raw.push_back(std::move(l));
    }
    for (const auto& l : sort_links(raw)) {
      Link link;
      link.name = l.name;
      link.fixed_translation = l.xyz;
      link.fixed_rotation = Quat(from_rpy({l.rpy.x(), l.rpy.y(), l.rpy.z()})).normalized();
      model.links.push_back(std::move(link));
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const int idx = model.link_index(raw[i].name);
      if (!raw[i].parent.empty()) model.links[idx].parent = model.link_index(raw[i].parent);
    }

    const auto joints = doc["joints"];
    if (joints) {
      // Joints are stored in the order of the links they drive so that joint
      // order is also topological.
      std::vector<Joint> parsed;
      for (const auto& n : joints) {
        if (!n["name"]) throw ConfigError("joints: entry without a name");
        Joint j;
        j.name = n["name"].as<std::string>();
        const std::string type = n["type"] ? n["type"].as<std::string>() : "revolute";
        if (type != "revolute") {
          throw ValidationError("joint '" + j.name + "': type '" + type +
                                "' is not supported (revolute only)");
        }
        const auto parent = n["parent"] ? n["parent"].as<std::string>() : std::string();
        const auto child = n["child"] ? n["child"].as<std::string>() : std::string();
        j.parent_link = model.link_index(parent);
        j.child_link = model.link_index(child);
        if (j.parent_link < 0) {
          throw ValidationError("joint '" + j.name + "': unknown parent link '" + parent + "'");
        }
        if (j.child_link < 0) {
          throw ValidationError("joint '" + j.name + "': unknown child link '" + child + "'");
        }
        j.axis = read_vec3(n["axis"], "joint '" + j.name + "' axis");
        std::tie(j.lower, j.upper) = read_range(n["limits"], "joint '" + j.name + "' limits");
        parsed.push_back(std::move(j));
      }
      std::stable_sort(parsed.begin(), parsed.end(),
                       [](const Joint& a, const Joint& b) { return a.child_link < b.child_link; });
      model.joints = std::move(parsed);
      for (std::size_t i = 0; i < model.joints.size(); ++i) {
        auto& link = model.links[model.joints[i].child_link];
        if (link.joint >= 0) {
          throw ValidationError("link '" + link.name + "' is driven by more than one joint");
        }
        link.joint = static_cast<int>(i);
      }
    }

    if (const auto groups = doc["groups"]) {
      model.lower_body = read_strings(groups["lower"], "groups.lower");
      model.upper_body = read_strings(groups["upper"], "groups.upper");
    }
    if (const auto mapping = doc["mapping"]) {
      if (!mapping.IsMap()) throw ConfigError("mapping: expected human -> robot entries");
      for (const auto& kv : mapping) {
        model.mapping.emplace_back(kv.first.as<std::string>(), kv.second.as<std::string>());
      }
    }

    const auto weights = doc["weights"];
    const double default_rot =
        weights && weights["default_rotation"] ? weights["default_rotation"].as<double>() : 1.0;
    for (const auto& [human, robot] : model.mapping) model.rotation_weights[robot] = default_rot;
    if (weights && weights["rotation"]) {
      for (const auto& kv : weights["rotation"]) {
        model.rotation_weights[kv.first.as<std::string>()] = kv.second.as<double>();
      }
    }
    if (weights && weights["position"]) {
      for (const auto& kv : weights["position"]) {
        model.position_weights[kv.first.as<std::string>()] = kv.second.as<double>();
      }
    }

    if (const auto s = doc["solver"]) {
      auto& o = model.solver;
      if (s["lambda_pos"]) o.lambda_pos = s["lambda_pos"].as<double>();
      if (s["max_iterations"]) o.max_iterations = s["max_iterations"].as<int>();
      if (s["step_tolerance"]) o.step_tolerance = s["step_tolerance"].as<double>();
      if (s["decrease_tolerance"]) o.decrease_tolerance = s["decrease_tolerance"].as<double>();
      if (s["damping"]) o.initial_damping = s["damping"].as<double>();
      if (s["pelvis_position"]) o.pelvis_position = s["pelvis_position"].as<bool>();
      if (s["stage1_sweeps"]) o.stage1_sweeps = s["stage1_sweeps"].as<int>();
    }
    if (const auto n = doc["neck"]) {
      if (n["head"]) model.neck.head = n["head"].as<std::string>();
      if (n["spine"]) model.neck.spine = n["spine"].as<std::string>();
      if (n["yaw_limits"]) {
        std::tie(model.neck.yaw_lower, model.neck.yaw_upper) =
            read_range(n["yaw_limits"], "neck.yaw_limits");
      }
      if (n["pitch_limits"]) {
        std::tie(model.neck.pitch_lower, model.neck.pitch_upper) =
            read_range(n["pitch_limits"], "neck.pitch_limits");
      }
    }
    if (const auto h = doc["hands"]) {
      model.left_hand = read_hand(h["left"], "left");
      model.right_hand = read_hand(h["right"], "right");
    }
    if (const auto c = doc["command"]) {
      if (c["velocity_smoothing"]) model.velocity_smoothing = c["velocity_smoothing"].as<double>();
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }

  model.hash = fnv1a_hex(text);
  validate_model(model);
  return model;
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::filesystem::path demo_model_path() { return TW2_DEMO_MODEL_PATH; }

void validate_model(const RobotModel& model) {
  if (model.links.empty()) throw ValidationError("model has no links");
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const auto& l = model.links[i];
    if (i == 0 ? l.parent != -1 : (l.parent < 0 || l.parent >= static_cast<int>(i))) {
      throw ValidationError("link '" + l.name + "' is not topologically ordered");
    }
  }
  for (const auto& j : model.joints) {
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw ValidationError("joint '" + j.name + "': axis must have unit norm");
    }
    if (!(j.lower < j.upper)) {
      throw ValidationError("joint '" + j.name + "': lower limit must be below upper limit");
    }
    if (model.links[j.child_link].parent != j.parent_link) {
      throw ValidationError("joint '" + j.name + "': parent link is not the child's parent");
    }
  }

  std::set<std::string> lower(model.lower_body.begin(), model.lower_body.end());
  std::set<std::string> upper(model.upper_body.begin(), model.upper_body.end());
  for (const auto* group : {&lower, &upper}) {
    for (const auto& name : *group) {
      if (model.link_index(name) < 0) {
        throw ValidationError("group lists unknown link '" + name + "'");
      }
    }
  }
  for (const auto& name : lower) {
    if (upper.contains(name)) {
      throw ValidationError("link '" + name + "' is in both lower and upper groups");
    }
  }
  std::set<std::string> mapped_robot;
  std::set<std::string> mapped_human;
  for (const auto& [human, robot] : model.mapping) {
    if (model.link_index(robot) < 0) {
      throw ValidationError("mapping '" + human + "' targets unknown link '" + robot + "'");
    }
    if (!mapped_robot.insert(robot).second) {
      throw ValidationError("robot link '" + robot + "' is mapped more than once");
    }
    if (!mapped_human.insert(human).second) {
      throw ValidationError("human link '" + human + "' is mapped more than once");
    }
    if (!lower.contains(robot) && !upper.contains(robot)) {
      throw ValidationError("mapped link '" + robot + "' is in neither group");
    }
  }
  for (const auto& [link, w] : model.rotation_weights) {
    if (!(w >= 0.0)) throw ValidationError("rotation weight of '" + link + "' must be >= 0");
    if (!mapped_robot.contains(link)) {
      throw ValidationError("rotation weight given for unmapped link '" + link + "'");
    }
  }
  for (const auto& [link, w] : model.position_weights) {
    if (!(w >= 0.0)) throw ValidationError("position weight of '" + link + "' must be >= 0");
    if (!mapped_robot.contains(link)) {
      throw ValidationError("position weight given for unmapped link '" + link + "'");
    }
    if (!lower.contains(link)) {
      throw ValidationError("position point '" + link + "' must be in the lower-body group");
    }
  }
  const auto& s = model.solver;
  if (!(s.lambda_pos >= 0.0) || s.max_iterations < 1 || !(s.step_tolerance > 0.0) ||
      !(s.decrease_tolerance >= 0.0) || !(s.initial_damping > 0.0) || s.stage1_sweeps < 0) {
    throw ValidationError("solver section has an out-of-range value");
  }
  if (!(model.neck.yaw_lower < model.neck.yaw_upper) ||
      !(model.neck.pitch_lower < model.neck.pitch_upper)) {
    throw ValidationError("neck: lower limit must be below upper limit");
  }
  validate_hand(model.left_hand, "left");
  validate_hand(model.right_hand, "right");
  if (!(model.velocity_smoothing >= 0.0 && model.velocity_smoothing < 1.0)) {
    throw ValidationError("command.velocity_smoothing must be in [0, 1)");
  }
}

std::vector<LinkPose> link_poses(const RobotModel& model, std::span<const double> q,
                                 const LinkPose& root) {
  if (q.size() != model.dof()) {
    throw DimensionError("joint vector has " + std::to_string(q.size()) + " entries, model has " +
                         std::to_string(model.dof()));
  }
  const std::size_t n = model.links.size();
  std::vector<Quat> rot(n);
  std::vector<LinkPose> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = model.links[i];
    if (l.parent < 0) {
      rot[i] = Quat(root.rotation).normalized();
      out[i] = root;
      continue;
    }
    Quat r = rot[l.parent] * l.fixed_rotation;
    if (l.joint >= 0) {
      const auto& j = model.joints[l.joint];
      r = r * Quat(Eigen::AngleAxisd(q[l.joint], j.axis));
    }
    rot[i] = r;
    out[i].rotation = r.toRotationMatrix();
    out[i].position = out[l.parent].position + rot[l.parent] * l.fixed_translation;
  }
  return out;
}

std::map<std::string, LinkPose> forward_kinematics(const RobotModel& model,
                                                   std::span<const double> q,
                                                   const LinkPose& root) {
  const auto poses = link_poses(model, q, root);
  std::map<std::string, LinkPose> out;
  for (std::size_t i = 0; i < poses.size(); ++i) out.emplace(model.links[i].name, poses[i]);
  return out;
}

std::vector<int> chain_joints(const RobotModel& model, int link) {
  std::vector<int> out;
  for (int i = link; i >= 0; i = model.links[i].parent) {
    if (model.links[i].joint >= 0) out.push_back(model.links[i].joint);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

MatX jacobian(const RobotModel& model, std::span<const double> q, std::string_view link,
              const LinkPose& root) {
  const int idx = model.link_index(link);
  if (idx < 0) throw std::invalid_argument("unknown link '" + std::string(link) + "'");
  const auto poses = link_poses(model, q, root);
  MatX jac = MatX::Zero(6, static_cast<Eigen::Index>(model.dof()));
  const Vec3& p = poses[idx].position;
  for (int j : chain_joints(model, idx)) {
    const auto& pose = poses[model.joints[j].child_link];
    const Vec3 axis = pose.rotation * model.joints[j].axis;
    jac.block<3, 1>(0, j) = axis;
    jac.block<3, 1>(3, j) = axis.cross(p - pose.position);
  }
  return jac;
}

void clamp_to_limits(const RobotModel& model, std::span<double> q) {
  if (q.size() != model.dof()) throw DimensionError("joint vector size does not match model");
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = std::clamp(q[i], model.joints[i].lower, model.joints[i].upper);
  }
}

}  // namespace tw2
