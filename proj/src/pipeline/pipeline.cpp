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


#include "tw2/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "tw2/errors.hpp"
#include "tw2/latency.hpp"
#include "tw2/motion.hpp"
#include "tw2/payloads.hpp"
#include "tw2/recorder.hpp"

namespace tw2 {

using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

std::chrono::nanoseconds period_of(double hz) {
  return std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(1e9 / hz)));
}

}  // namespace

// ------------------------------------------------------------------ sources

FramePlayer::FramePlayer(std::vector<HumanPoseFrame> frames, double rate_hz)
    : frames_(std::move(frames)), period_(period_of(rate_hz)) {
  if (!(rate_hz >= 1.0)) throw std::invalid_argument("pose rate must be at least 1 Hz");
}

std::optional<HumanPoseFrame> FramePlayer::next() {
  std::unique_lock lock(mu_);
  if (index_ == 0) next_ = Clock::now();
  if (closed_ || index_ >= frames_.size()) return std::nullopt;
  if (cv_.wait_until(lock, next_, [this] { return closed_; })) return std::nullopt;
  next_ += period_;
  HumanPoseFrame f = frames_[index_++];
  f.timestamp_ns = now_ns();
  return f;
}

void FramePlayer::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

BusPoseSource::BusPoseSource(ClientOptions options) {
  options.subscribe = {MsgType::kPose};
  bus_ = std::make_unique<BusClient>(std::move(options));
}

std::optional<HumanPoseFrame> BusPoseSource::next() {
  while (!closed_) {
    auto m = bus_->receive(100ms);
    if (m) return decode_pose(*m);
    if (!bus_->connected()) return std::nullopt;
  }
  return std::nullopt;
}

// ------------------------------------------------------------------ teleop

TeleopNode::TeleopNode(const RobotModel& model, TeleopOptions options,
                       std::unique_ptr<PoseSource> source)
    : model_(model),
      layout_(Layout::for_model(model)),
      options_(std::move(options)),
      source_(std::move(source)),
      controller_(options_.interp_duration_s, options_.cmd_hz) {
  if (!(options_.cmd_hz >= 1.0)) throw std::invalid_argument("command rate must be at least 1 Hz");
  options_.bus.subscribe = {MsgType::kCtrl};
  if (options_.bus.layout.is_null()) options_.bus.layout = layout_.to_json();
  bus_ = std::make_unique<BusClient>(options_.bus);

  // Join a session that is already running.
  const std::string mode = bus_->handshake().value("mode", "IDLE");
  if (mode == "ACTIVE" || mode == "INTERPOLATING" || mode == "PAUSED") {
    controller_.apply(CtrlCode::kStart);
    if (mode == "PAUSED") controller_.apply(CtrlCode::kPause);
  } else if (mode == "STOPPED") {
    controller_.apply(CtrlCode::kStop);
  }
  stats_.mode = controller_.mode();

  pose_thread_ = std::thread([this] { pose_loop(); });
  cmd_thread_ = std::thread([this] { cmd_loop(); });
  if (options_.auto_start && controller_.mode() == Mode::kIdle) request(CtrlCode::kStart);
}

TeleopNode::~TeleopNode() {
  try {
    shutdown(false);
  } catch (const std::exception& e) {
    spdlog::warn("teleop: shutdown: {}", e.what());
  }
}

void TeleopNode::request(CtrlCode code) {
  bus_->publish(MsgType::kCtrl, encode_ctrl({code, std::nullopt}));
}

TeleopStats TeleopNode::stats() const {
  std::lock_guard lock(mu_);
  auto s = stats_;
  s.source_exhausted = exhausted_.load();
  return s;
}

void TeleopNode::pose_loop() {
  RetargetSession session(model_);
  CommandDeriver deriver(model_.velocity_smoothing);
  while (running_) {
    auto frame = source_->next();
    if (!frame) break;
    const auto t0 = Clock::now();
    RetargetResult r;
    CommandVector cmd;
    try {
      r = session.process(*frame,
                          GraspCommand::from_trigger(frame->left_trigger, GraspMode::kPower),
                          GraspCommand::from_trigger(frame->right_trigger, GraspMode::kPower));
      cmd = deriver.push(RobotPoseSample::from_result(r, frame->timestamp_ns));
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      if (stats_.rejected++ % 100 == 0) spdlog::warn("teleop: frame rejected: {}", e.what());
      continue;
    }
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    std::lock_guard lock(mu_);
    live_ = std::move(cmd);
    ++stats_.poses;
    if (r.degraded) ++stats_.retarget_degraded;
    stats_.retarget_max_ms = std::max(stats_.retarget_max_ms, ms);
  }
  exhausted_ = true;
}

void TeleopNode::on_ctrl(const Message& m) {
  if (!(m.flags & kFlagAck)) return;
  const auto c = decode_ctrl(m);
  if (!is_transition(c.code)) return;
  const Mode before = controller_.mode();
  controller_.apply(c.code);
  if (before != Mode::kStopped && controller_.mode() == Mode::kStopped) publish_hold();
}

void TeleopNode::publish_hold() {
  if (hold_sent_) return;
  const auto hold = controller_.hold_command(now_ns());
  if (!hold) return;
  bus_->publish(MsgType::kCmd, encode_cmd(layout_, *hold), hold->timestamp_ns);
  hold_sent_ = true;
  ++stats_.commands;
}

void TeleopNode::cmd_loop() {
  const auto period = period_of(options_.cmd_hz);
  auto next = Clock::now() + period;
  std::uint64_t last_ts = 0;
  while (running_) {
    std::this_thread::sleep_until(next);
    next += period;
    if (next < Clock::now()) next = Clock::now() + period;
    std::lock_guard lock(mu_);
    while (auto m = bus_->receive(0ms)) {
      if (m->type == MsgType::kCtrl) on_ctrl(*m);
    }
    if (live_) {
      if (auto out = controller_.tick(*live_)) {
        // Header timestamps never decrease on one connection.
        const std::uint64_t ts = std::max<std::uint64_t>(last_ts, out->timestamp_ns);
        bus_->publish(MsgType::kCmd, encode_cmd(layout_, *out), ts);
        last_ts = ts;
        ++stats_.commands;
      }
      if (controller_.interp_finished()) request(CtrlCode::kInterpDone);
    }
    stats_.mode = controller_.mode();
  }
}

void TeleopNode::shutdown(bool estop) {
  if (!running_.exchange(false)) return;
  source_->close();
  if (pose_thread_.joinable()) pose_thread_.join();
  if (cmd_thread_.joinable()) cmd_thread_.join();
  if (!bus_->connected()) return;
  std::unique_lock lock(mu_);
  if (controller_.mode() != Mode::kStopped) {
    lock.unlock();
    request(estop ? CtrlCode::kEstop : CtrlCode::kStop);
    const auto deadline = Clock::now() + 500ms;
    while (Clock::now() < deadline) {
      auto m = bus_->receive(50ms);
      if (!m || m->type != MsgType::kCtrl) continue;
      lock.lock();
      on_ctrl(*m);
      const bool stopped = controller_.mode() == Mode::kStopped;
      lock.unlock();
      if (stopped) break;
    }
    lock.lock();
  }
  // The hold goes out even when the broker did not confirm the stop.
  publish_hold();
  stats_.mode = controller_.mode();
}

// ------------------------------------------------------------------ sim

SimNode::SimNode(const RobotModel& model, SimNodeOptions options)
    : model_(model), layout_(Layout::for_model(model)), options_(std::move(options)) {
  if (!(options_.rate_hz >= 1.0)) throw std::invalid_argument("sim rate must be at least 1 Hz");
  options_.bus.subscribe = {MsgType::kCmd};
  if (options_.bus.layout.is_null()) options_.bus.layout = layout_.to_json();
  bus_ = std::make_unique<BusClient>(options_.bus);
  thread_ = std::thread([this] { run(); });
}

SimNode::~SimNode() { stop(); }

void SimNode::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

SimNodeStats SimNode::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void SimNode::run() {
  const auto period = period_of(options_.rate_hz);
  const double dt = 1.0 / options_.rate_hz;
  std::optional<SimState> state;
  std::optional<CommandVector> cmd;
  std::int64_t origin = 0;
  std::uint32_t last_seq = 0;
  std::uint64_t last_ts = 0;
  auto next = Clock::now() + period;
  while (running_) {
    std::this_thread::sleep_until(next);
    next += period;
    if (next < Clock::now()) next = Clock::now() + period;

    std::uint64_t received = 0, missed = 0;
    while (auto m = bus_->receive(0ms)) {
      if (m->type != MsgType::kCmd) continue;
      if (last_seq != 0 && m->seq > last_seq + 1) missed += m->seq - last_seq - 1;
      last_seq = m->seq;
      try {
        cmd = decode_cmd(layout_, *m);
        cmd->timestamp_ns = static_cast<std::int64_t>(m->timestamp_ns);
        origin = cmd->timestamp_ns;
        ++received;
      } catch (const std::exception& e) {
        spdlog::warn("sim: dropping CMD: {}", e.what());
      }
    }
    if (!cmd) continue;
    if (!state) {
      state = make_sim_state(model_, options_.sim,
                             {from_rpy({cmd->roll, cmd->pitch, 0.0}), Vec3(0.0, 0.0, cmd->z)});
      state->q = actuated_targets(*cmd);
      state->last_target = state->q;
      state->last_target_ns = cmd->timestamp_ns;
    }
    *state = step(*state, *cmd, dt);
    const auto metric = tracking_metric(flatten(layout_, *cmd),
                                        flatten(layout_, achieved_command(layout_, *state)),
                                        options_.alpha);
    const std::int64_t t = now_ns();
    const std::uint64_t ts = std::max<std::uint64_t>(last_ts, static_cast<std::uint64_t>(t));
    bus_->publish(MsgType::kState,
                  encode_state(layout_, {origin, proprio_state(*state, t)}), ts);
    last_ts = ts;

    std::lock_guard lock(mu_);
    ++stats_.steps;
    stats_.commands += received;
    stats_.missed_commands += missed;
    sum_r_ += metric.r_track;
    stats_.mean_r_track = sum_r_ / static_cast<double>(stats_.steps);
    stats_.min_r_track = std::min(stats_.min_r_track, metric.r_track);
  }
}

// ------------------------------------------------------------------ monitor

DelayMonitor::DelayMonitor(ClientOptions options) {
  options.subscribe = {MsgType::kCmd, MsgType::kState};
  bus_ = std::make_unique<BusClient>(std::move(options));
  thread_ = std::thread([this] { run(); });
}

DelayMonitor::~DelayMonitor() { stop(); }

void DelayMonitor::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

void DelayMonitor::run() {
  while (running_) {
    auto m = bus_->receive(100ms);
    if (!m) {
      if (!bus_->connected()) return;
      continue;
    }
    const std::int64_t rx = now_ns();
    const int k = m->type == MsgType::kCmd ? 0 : 1;
    std::lock_guard lock(mu_);
    if (last_seq_[k] != 0 && m->seq > last_seq_[k] + 1) missed_[k] += m->seq - last_seq_[k] - 1;
    last_seq_[k] = m->seq;
    if (m->type != MsgType::kState || m->payload.size() < 8) continue;
    std::int64_t origin = 0;
    std::memcpy(&origin, m->payload.data(), sizeof origin);  // little-endian host
    if (origin > last_origin_) {
      delays_ms_.push_back(static_cast<double>(rx - origin) * 1e-6);
      last_origin_ = origin;
    }
  }
}

DelayReport DelayMonitor::report() const {
  std::lock_guard lock(mu_);
  DelayReport r;
  r.samples = delays_ms_.size();
  r.p50_ms = percentile(delays_ms_, 50.0);
  r.p99_ms = percentile(delays_ms_, 99.0);
  r.max_ms = delays_ms_.empty() ? 0.0 : *std::max_element(delays_ms_.begin(), delays_ms_.end());
  r.missed_commands = missed_[0];
  r.missed_states = missed_[1];
  return r;
}

// ------------------------------------------------------------------ config

PoseSourceKind parse_pose_source(std::string_view name) {
  if (name == "synthetic-walk") return PoseSourceKind::kSyntheticWalk;
  if (name == "pose-file") return PoseSourceKind::kPoseFile;
  if (name == "bus-topic") return PoseSourceKind::kBusTopic;
  throw ConfigError("unknown pose source '" + std::string(name) +
                    "' (expected synthetic-walk, pose-file or bus-topic)");
}

std::string_view pose_source_name(PoseSourceKind kind) {
  switch (kind) {
    case PoseSourceKind::kSyntheticWalk: return "synthetic-walk";
    case PoseSourceKind::kPoseFile: return "pose-file";
    case PoseSourceKind::kBusTopic: return "bus-topic";
  }
  return "?";
}

void PipelineConfig::validate() const {
  const std::pair<const char*, double> rates[] = {
      {"pose_hz", pose_hz}, {"cmd_hz", cmd_hz}, {"sim_hz", sim_hz}, {"record_hz", record_hz}};
  for (const auto& [name, hz] : rates) {
    if (!(hz >= 1.0) || !std::isfinite(hz)) {
      throw ConfigError(std::string(name) + " must be at least 1 Hz");
    }
  }
  if (!(duration_s >= 0.0)) throw ConfigError("duration_s must be non-negative");
  if (!(interp_duration_s > 0.0)) throw ConfigError("interp_duration_s must be positive");
  if (!std::filesystem::is_regular_file(model_path)) {
    throw ConfigError("model file not found: " + model_path.string());
  }
  if (source == PoseSourceKind::kPoseFile && !std::filesystem::is_regular_file(pose_file)) {
    throw ConfigError("pose file not found: " + pose_file.string());
  }
  if (source == PoseSourceKind::kSyntheticWalk && duration_s == 0.0) {
    throw ConfigError("synthetic-walk needs duration_s > 0");
  }
}

PipelineConfig PipelineConfig::from_yaml(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot read " + path.string() + ": " + e.what());
  }
  PipelineConfig c;
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError(path.string() + ": expected a mapping");
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  try {
    for (const auto& kv : root) {
      const auto key = kv.first.as<std::string>();
      const auto& v = kv.second;
      if (key == "model") c.model_path = resolve(v.as<std::string>());
      else if (key == "source") c.source = parse_pose_source(v.as<std::string>());
      else if (key == "pose_file") c.pose_file = resolve(v.as<std::string>());
      else if (key == "seed") c.seed = v.as<std::uint64_t>();
      else if (key == "duration_s") c.duration_s = v.as<double>();
      else if (key == "pose_hz") c.pose_hz = v.as<double>();
      else if (key == "cmd_hz") c.cmd_hz = v.as<double>();
      else if (key == "sim_hz") c.sim_hz = v.as<double>();
      else if (key == "record_hz") c.record_hz = v.as<double>();
      else if (key == "interp_duration_s") c.interp_duration_s = v.as<double>();
      else if (key == "host") c.host = v.as<std::string>();
      else if (key == "bus_port") c.bus_port = v.as<std::uint16_t>();
      else if (key == "start_broker") c.start_broker = v.as<bool>();
      else if (key == "start_sim") c.start_sim = v.as<bool>();
      else if (key == "record") c.record_path = resolve(v.as<std::string>());
      else if (key == "sim") {
        for (const auto& s : v) {
          const auto k = s.first.as<std::string>();
          if (k == "inertia") c.sim.inertia = s.second.as<double>();
          else if (k == "kp") c.sim.kp = s.second.as<double>();
          else if (k == "kd") c.sim.kd = s.second.as<double>();
          else if (k == "substep_hz") c.sim.substep_hz = s.second.as<double>();
          else if (k == "attitude_time_constant") c.sim.attitude_time_constant = s.second.as<double>();
          else if (k == "velocity_feedforward") c.sim.velocity_feedforward = s.second.as<bool>();
          else throw ConfigError(path.string() + ": unknown key sim." + k);
        }
      } else {
        throw ConfigError(path.string() + ": unknown key " + key);
      }
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"model", model_path.string()},
          {"source", pose_source_name(source)},
          {"pose_file", pose_file.string()},
          {"seed", seed},
          {"duration_s", duration_s},
          {"pose_hz", pose_hz},
          {"cmd_hz", cmd_hz},
          {"sim_hz", sim_hz},
          {"record_hz", record_hz},
          {"interp_duration_s", interp_duration_s},
          {"host", host},
          {"bus_port", bus_port},
          {"start_broker", start_broker},
          {"start_sim", start_sim},
          {"record", record_path.string()}};
}

std::uint64_t PipelineReport::dropped_messages() const {
  return broker_dropped + client_dropped + sim.missed_commands + delay.missed_commands +
         delay.missed_states;
}

nlohmann::json PipelineReport::to_json() const {
  return {{"wall_s", wall_s},
          {"poses", teleop.poses},
          {"commands", teleop.commands},
          {"sim_steps", sim.steps},
          {"mode", mode_name(teleop.mode)},
          {"delay_ms", {{"samples", delay.samples}, {"p50", delay.p50_ms}, {"p99", delay.p99_ms},
                        {"max", delay.max_ms}}},
          {"mean_r_track", sim.mean_r_track},
          {"min_r_track", sim.min_r_track},
          {"dropped_messages", dropped_messages()},
          {"records", records},
          {"retarget_max_ms", teleop.retarget_max_ms},
          {"retarget_degraded", teleop.retarget_degraded},
          {"rejected_frames", teleop.rejected},
          {"interrupted", interrupted}};
}

// ------------------------------------------------------------------ run

PipelineReport run_teleop(const PipelineConfig& config, const std::atomic<bool>* cancel) {
  config.validate();
  const RobotModel model = load_model(config.model_path);
  const Layout layout = Layout::for_model(model);

  std::unique_ptr<PoseSource> source;
  switch (config.source) {
    case PoseSourceKind::kSyntheticWalk:
      source = std::make_unique<FramePlayer>(
          gen_synthetic_motion(model, MotionKind::kWalk, config.duration_s, config.seed,
                               config.pose_hz),
          config.pose_hz);
      break;
    case PoseSourceKind::kPoseFile: {
      PoseFileInfo info;
      auto frames = read_pose_file(config.pose_file, &info);
      source = std::make_unique<FramePlayer>(std::move(frames), info.rate_hz);
      break;
    }
    case PoseSourceKind::kBusTopic:
      break;  // needs the broker first
  }

  std::unique_ptr<Broker> broker;
  std::uint16_t port = config.bus_port;
  if (config.start_broker) {
    broker = std::make_unique<Broker>(BrokerConfig{config.host, port, layout.to_json()});
    port = broker->port();
  }
  auto client = [&](std::string name) {
    ClientOptions o;
    o.host = config.host;
    o.port = port;
    o.name = std::move(name);
    o.layout = layout.to_json();
    return o;
  };
  if (!source) source = std::make_unique<BusPoseSource>(client("teleop-pose"));

  std::unique_ptr<SimNode> sim;
  if (config.start_sim) {
    SimNodeOptions so;
    so.bus = client("sim");
    so.rate_hz = config.sim_hz;
    so.sim = config.sim;
    sim = std::make_unique<SimNode>(model, so);
  }
  DelayMonitor monitor(client("monitor"));
  std::unique_ptr<Recorder> recorder;
  if (!config.record_path.empty()) {
    EpisodeHeader h;
    h.layout = layout;
    h.cmd_hz = config.cmd_hz;
    h.state_hz = config.sim_hz;
    h.model_hash = model_hash(config.model_path);
    h.created_at_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    RecorderOptions ro;
    ro.record_hz = config.record_hz;
    recorder = std::make_unique<Recorder>(client("recorder"), config.record_path, h, ro);
  }

  TeleopOptions to;
  to.bus = client("teleop");
  to.cmd_hz = config.cmd_hz;
  to.interp_duration_s = config.interp_duration_s;
  const auto t0 = Clock::now();
  TeleopNode teleop(model, to, std::move(source));

  PipelineReport report;
  const auto limit = config.duration_s > 0.0
                         ? t0 + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(config.duration_s))
                         : Clock::time_point::max();
  while (Clock::now() < limit && !teleop.source_exhausted()) {
    if (cancel && cancel->load()) {
      report.interrupted = true;
      break;
    }
    std::this_thread::sleep_for(20ms);
  }
  teleop.shutdown(report.interrupted);
  report.wall_s = std::chrono::duration<double>(Clock::now() - t0).count();
  // Let the hold command reach the sim and the last state reach the monitor.
  std::this_thread::sleep_for(std::chrono::milliseconds(
      static_cast<int>(std::ceil(3000.0 / std::min(config.sim_hz, config.cmd_hz)))));
  if (recorder) report.records = recorder->stop();
  if (sim) {
    sim->stop();
    report.sim = sim->stats();
  }
  monitor.stop();
  report.teleop = teleop.stats();
  report.delay = monitor.report();
  report.client_dropped = monitor.client_dropped();
  if (broker) {
    report.broker_dropped = broker->stats().dropped;
    broker->stop();
  }
  return report;
}

}  // namespace tw2
