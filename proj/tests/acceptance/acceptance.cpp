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


// Acceptance run: one PASS/FAIL line per release criterion. Exit status is
// the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <spdlog/spdlog.h>

#include "../support/episodes.hpp"
#include "../support/fixtures.hpp"
#include "tw2/inference.hpp"
#include "tw2/motion.hpp"
#include "tw2/offline.hpp"
#include "tw2/pipeline.hpp"
#include "tw2/policy.hpp"
#include "tw2/recorder.hpp"
#include "tw2/retarget.hpp"
#include "tw2/session.hpp"
#include "tw2/sim.hpp"

namespace tw2 {
namespace {

using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const RobotModel& demo() {
  static const RobotModel m = load_model(demo_model_path());
  return m;
}

LinkPose random_root(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return {testing::random_rotation(rng), Vec3(u(rng), u(rng), 0.5 + 0.1 * u(rng))};
}

// ------------------------------------------------------------- criteria

Verdict self_retarget() {
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();
  double worst_q = 0.0, worst_res = 0.0;
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto q0 = testing::random_config(demo(), rng);
    const auto r = retarget_body(demo(), frame_from_robot(demo(), q0, random_root(rng)));
    double dq = 0.0;
    for (std::size_t i = 0; i < q0.size(); ++i) dq = std::max(dq, std::abs(r.q[i] - q0[i]));
    worst_q = std::max(worst_q, dq);
    worst_res = std::max(worst_res, r.residual);
    if (dq < 1e-4 && r.residual < 1e-8) ++ok;
  }
  const double secs = seconds_since(t0);
  return {ok == 100 && secs < 30.0,
          fmt("%d/100 configs; max |q - q0| %.2e rad (< 1e-4), max residual %.2e (< 1e-8), "
              "%.2f s (< 30 s)",
              ok, worst_q, worst_res, secs)};
}

Verdict teleport_invariance() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  int equal = 0;
  std::size_t iterates = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto frame = frame_from_robot(demo(), testing::random_config(demo(), rng), random_root(rng));
    // Perturb so the solve needs several iterations.
    for (const char* name : {"right_knee", "left_elbow"}) {
      LinkPose p = *frame.find(name);
      p.rotation = rot_y(0.3) * rot_x(-0.2) * p.rotation;
      frame.set(name, p);
    }
    SolveTrace a, b;
    const auto ra = retarget_body(demo(), frame, std::nullopt, &a);
    auto moved = frame;
    moved.translate(Vec3(u(rng), u(rng), u(rng)));
    const auto rb = retarget_body(demo(), moved, std::nullopt, &b);
    iterates += a.iterates.size();
    if (a.iterates == b.iterates && a.objectives == b.objectives && ra.q == rb.q) ++equal;
  }
  return {equal == 20, fmt("%d/20 translated solves bit-identical (%zu iterates compared)", equal,
                           iterates)};
}

double planar_objective(const Mat3& rt, const Vec3& pt, double q1, double q2, double q3) {
  const Vec3 hip(0.0, 0.1, -0.05), link(0.0, 0.0, -0.4), foot(0.12, 0.0, -0.05);
  const Mat3 r123 = rot_y(q1 + q2 + q3);
  const Vec3 p = hip + rot_y(q1) * link + rot_y(q1 + q2) * link + r123 * foot;
  return (rt - r123).squaredNorm() + 5.0 * (pt - p).squaredNorm();
}

Verdict grid_search() {
  const auto model = parse_model(testing::kPlanarLegModel);
  std::mt19937_64 rng(103);
  std::normal_distribution<double> g(0.0, 0.05);
  int ok = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    auto frame = frame_from_robot(model, testing::random_config(model, rng), LinkPose::identity());
    if (trial % 2 == 1) {  // unreachable target: tilt out of plane and shift
      LinkPose f = *frame.find("foot");
      f.rotation = rot_x(g(rng)) * rot_z(g(rng)) * f.rotation;
      f.position += Vec3(g(rng), g(rng), g(rng));
      frame.set("foot", f);
    }
    const Mat3 rt = frame.find("foot")->rotation;
    const Vec3 pt = frame.find("foot")->position;
    const auto& j = model.joints;
    double best = std::numeric_limits<double>::infinity();
    for (double a = j[0].lower; a <= j[0].upper + 1e-12; a += 0.01) {
      for (double b = j[1].lower; b <= j[1].upper + 1e-12; b += 0.01) {
        for (double c = j[2].lower; c <= j[2].upper + 1e-12; c += 0.01) {
          best = std::min(best, planar_objective(rt, pt, a, b, c));
        }
      }
    }
    const double solved = retarget_body(model, frame).residual;
    worst = std::max(worst, solved - best);
    if (solved <= best + 1e-6) ++ok;
  }
  return {ok == 20, fmt("%d/20 targets; max (solver - grid minimum) %.2e (<= 1e-6)", ok, worst)};
}

Verdict neck_round_trip() {
  double worst = 0.0;
  int n = 0;
  for (int i = 0; i < 100; ++i) {
    const double yaw = -std::numbers::pi + 2.0 * std::numbers::pi * (i + 0.5) / 100.0;
    for (int k = 0; k < 100; ++k) {
      const double pitch = -1.55 + 3.1 * k / 99.0;
      const auto e = extract_neck_angles(rot_z(yaw) * rot_y(pitch));
      worst = std::max({worst, std::abs(wrap_angle(e.yaw - yaw)), std::abs(e.pitch - pitch)});
      ++n;
    }
  }
  return {worst <= 1e-10, fmt("%d grid points, |pitch| <= 1.55; max error %.2e rad (<= 1e-10)", n,
                              worst)};
}

Verdict pd_law() {
  // Formula: bit-exact against K_P (q_tgt - q) - K_D dq.
  std::mt19937_64 rng(104);
  std::normal_distribution<double> g;
  auto s = make_sim_state(demo());
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> tgt(s.q.size());
    for (std::size_t i = 0; i < s.q.size(); ++i) {
      s.q[i] = g(rng);
      s.dq[i] = g(rng);
      tgt[i] = g(rng);
    }
    const auto tau = pd_torque(s, tgt);
    for (std::size_t i = 0; i < tau.size(); ++i) {
      if (tau[i] != s.kp[i] * (tgt[i] - s.q[i]) - s.kd[i] * s.dq[i]) ++mismatches;
    }
  }
  // Step response of every joint, critically damped, no feedforward.
  const Layout layout = Layout::for_model(demo());
  SimConfig cfg;
  cfg.velocity_feedforward = false;
  const auto start = make_sim_state(demo(), cfg);
  auto cmd = unflatten_command(layout, std::vector<double>(layout.command_dim(), 0.0));
  cmd.z = start.position.z();
  auto targets = actuated_targets(cmd);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double lo = start.lower[i], hi = start.upper[i];
    targets[i] = std::clamp(start.q[i] + 0.5, lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo));
  }
  const auto flat = [&] {
    auto f = flatten(layout, cmd);
    std::copy(targets.begin(), targets.end(), f.begin() + 6);
    return f;
  }();
  cmd = unflatten_command(layout, flat);
  auto s2 = start;
  double worst_settle = 0.0, worst_overshoot = 0.0;
  std::vector<double> settled(targets.size(), -1.0), peak_over(targets.size(), 0.0);
  for (int k = 1; k <= 100; ++k) {
    cmd.timestamp_ns = k * 20'000'000LL;
    s2 = step(s2, cmd, 0.02);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double dir = targets[i] >= start.q[i] ? 1.0 : -1.0;
      peak_over[i] = std::max(peak_over[i], dir * (s2.q[i] - targets[i]));
      const bool inside = std::abs(s2.q[i] - targets[i]) < 0.01;
      if (inside && settled[i] < 0.0) settled[i] = s2.time;
      if (!inside) settled[i] = -1.0;
    }
  }
  bool all_settled = true;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (settled[i] < 0.0 || settled[i] > 1.0) all_settled = false;
    worst_settle = std::max(worst_settle, settled[i] < 0.0 ? 99.0 : settled[i]);
    const double span = std::abs(targets[i] - start.q[i]);
    if (span > 0.0) worst_overshoot = std::max(worst_overshoot, peak_over[i] / span);
  }
  return {mismatches == 0 && all_settled && worst_overshoot < 0.01,
          fmt("torque mismatches %zu/%zu; %zu joints settle (|e| < 0.01 rad) by %.2f s (<= 1 s), "
              "max overshoot %.3f%% (< 1%%)",
              mismatches, 100 * s.q.size(), targets.size(), worst_settle, 100.0 * worst_overshoot)};
}

Verdict end_to_end(PipelineReport& out) {
  PipelineConfig c;
  c.duration_s = 60.0;
  c.bus_port = 0;
  out = run_teleop(c);
  const auto& d = out.delay;
  const bool pass = d.p99_ms < 100.0 && out.dropped_messages() == 0 && d.samples > 2900 &&
                    out.teleop.poses >= 5990;
  return {pass, fmt("60 s at 100 Hz poses: %llu poses, %llu CMD, %zu delay samples; delay p50 %.1f "
                    "ms, p99 %.1f ms (< 100 ms), max %.1f ms; dropped %llu (== 0)",
                    static_cast<unsigned long long>(out.teleop.poses),
                    static_cast<unsigned long long>(out.teleop.commands), d.samples, d.p50_ms,
                    d.p99_ms, d.max_ms, static_cast<unsigned long long>(out.dropped_messages()))};
}

Verdict resume_safety() {
  // Random pause/resume schedules against a moving synthetic-walk target.
  const Layout layout = Layout::for_model(demo());
  const auto cmds = commands_from_motion(demo(), gen_synthetic_motion(demo(), MotionKind::kWalk,
                                                                       12.0, 7),
                                         50.0);
  std::mt19937_64 rng(105);
  std::size_t checked = 0, violations = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double duration = 0.2 + 0.1 * static_cast<double>(rng() % 15);
    SessionController s(duration, 50.0);
    s.apply(CtrlCode::kStart);
    const std::size_t pause_at = 20 + rng() % 100;
    const std::size_t resume_at = pause_at + 5 + rng() % 150;
    std::optional<CommandVector> prev;
    std::vector<double> frozen, gap;
    for (std::size_t k = 0; k < cmds.size(); ++k) {
      if (k == pause_at) s.apply(CtrlCode::kPause);
      if (k == resume_at) s.apply(CtrlCode::kResume);
      const bool blending = s.mode() == Mode::kInterpolating;
      const auto out = s.tick(cmds[k]);
      if (!out) continue;
      if (blending && prev) {
        // Allowed step: current gap between frozen pose and live target spread
        // over the blend, plus the live target's own motion.
        const auto a = actuated_targets(*prev), b = actuated_targets(*out);
        const auto live = actuated_targets(cmds[k]), live_prev = actuated_targets(cmds[k - 1]);
        const double steps = std::round(duration * 50.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double bound = std::abs(live[i] - frozen[i]) / steps +
                               std::abs(live[i] - live_prev[i]) + 1e-9;
          const double d = std::abs(b[i] - a[i]);
          worst_ratio = std::max(worst_ratio, d / bound);
          if (d > bound) ++violations;
          ++checked;
        }
      }
      if (s.mode() == Mode::kPaused) frozen = actuated_targets(*out);
      prev = out;
    }
  }
  // Static target: the exact per-step bound.
  SessionController s(1.0, 50.0);
  auto from = cmds.front();
  auto to = from;
  for (auto& q : to.q_ref) q += 0.5;
  s.apply(CtrlCode::kStart);
  s.tick(from);
  s.apply(CtrlCode::kPause);
  s.tick(to);
  s.apply(CtrlCode::kResume);
  auto prev = actuated_targets(from);
  int blend_steps = 0;
  double max_step = 0.0;
  while (s.mode() == Mode::kInterpolating) {
    const auto c = actuated_targets(*s.tick(to));
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = std::abs(c[i] - prev[i]);
      max_step = std::max(max_step, d);
      const double gap = std::abs(actuated_targets(to)[i] - actuated_targets(from)[i]);
      if (d > gap / 50.0 + 1e-9) ++violations;
      ++checked;
    }
    prev = c;
    ++blend_steps;
  }
  return {violations == 0 && blend_steps == 50,
          fmt("%zu joint steps checked, %zu over bound; 0.5 rad gap over 1 s at 50 Hz: %d steps, "
              "max step %.6f rad (<= 0.01 + 1e-9); worst step/bound on moving target %.3f",
              checked, violations, blend_steps, max_step, worst_ratio)};
}

Verdict recorder_properties() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("tw2_accept_" + std::to_string(now_ns()));
  std::filesystem::create_directories(dir);
  EpisodeHeader h;
  h.layout = Layout::for_model(demo());
  h.model_hash = model_hash(demo_model_path());
  std::mt19937_64 rng(106);
  int round_trip = 0, conservation = 0, idempotent = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto ep = testing::random_episode(rng, h);
    write_episode(dir / "rt.tw2e", ep);
    if (read_episode(dir / "rt.tw2e") == ep) ++round_trip;
  }
  for (int trial = 0; trial < 300; ++trial) {
    const auto ep = testing::random_episode(rng, h, 80);
    const auto r = segment(ep);
    std::size_t total = 0;
    for (const auto& e : r.episodes) total += e.records.size();
    if (total == r.report.output_records &&
        total + r.report.dropped_records == ep.records.size()) {
      ++conservation;
    }
  }
  for (int trial = 0; trial < 300; ++trial) {
    const auto values = testing::piecewise_holds(rng);
    Episode ep;
    ep.header = h;
    for (std::size_t i = 0; i < values.size(); ++i) {
      ep.records.push_back({static_cast<std::int64_t>(i) * 33'333'333 + 1000,
                            std::vector<double>(h.layout.command_dim(), values[i]),
                            std::vector<double>(h.layout.state_dim(), 0.0), std::nullopt});
    }
    const double T = 0.5 + static_cast<double>(rng() % 20) * 0.1;
    const auto once = filter_idle(ep, 1e-3, T).first;
    if (filter_idle(once, 1e-3, T).first == once) ++idempotent;
  }
  std::filesystem::remove_all(dir);
  return {round_trip == 400 && conservation == 300 && idempotent == 300,
          fmt("round trip %d/400, segmentation conservation %d/300, idle-filter idempotence "
              "%d/300 (1000 cases)",
              round_trip, conservation, idempotent)};
}

Verdict chunk_scheduler(double seconds) {
  const Layout layout = Layout::for_model(demo());
  EchoPolicyOptions o;
  o.latency = 40ms;
  EchoPolicyServer server(o);
  PolicyRunnerConfig cfg;
  cfg.endpoint_port = server.port();
  std::uint64_t count = 0;
  RunnerStats st;
  {
    PolicyRunner runner(layout, cfg, [&](const Emission&) { ++count; });
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    runner.stop();
    st = runner.stats();
  }
  std::size_t off = 0;
  for (auto n : st.executed_per_chunk) off += n != kExecuteSteps;
  const double rate = st.emit_rate_hz();
  const bool pass = std::abs(rate - 30.0) <= 0.3 && off == 0 && !st.executed_per_chunk.empty() &&
                    st.starved_ticks == 0;
  std::vector<double> dev;
  for (double dt : st.intervals_ms) dev.push_back(std::abs(dt - 1000.0 / 30.0));
  std::sort(dev.begin(), dev.end());
  const double p99 = dev.empty() ? 0.0 : dev[static_cast<std::size_t>(0.99 * (dev.size() - 1))];
  return {pass, fmt("%.0f s with 40 ms endpoint: %llu emissions at %.4f Hz (30 +- 0.3), %zu chunks "
                    "with %zu not executing exactly 48, starved ticks %llu (== 0); inference %.3f "
                    "Hz, interval p99 deviation %.2f ms",
                    seconds, static_cast<unsigned long long>(st.emissions), rate,
                    st.executed_per_chunk.size(), off,
                    static_cast<unsigned long long>(st.starved_ticks), st.inference_rate_hz(), p99)};
}

Verdict pipeline_tracking(const PipelineReport& live) {
  // Bundled walk: seed 7, 20 s, commands at 50 Hz, replayed over the bus into
  // the tracker simulator.
  const Layout layout = Layout::for_model(demo());
  const auto cmds =
      commands_from_motion(demo(), gen_synthetic_motion(demo(), MotionKind::kWalk, 20.0, 7), 50.0);
  Episode ep;
  ep.header.layout = layout;
  for (const auto& c : cmds) {
    ep.records.push_back({c.timestamp_ns + 1, flatten(layout, c),
                          std::vector<double>(layout.state_dim(), 0.0), std::nullopt});
  }
  Broker broker({"127.0.0.1", 0, layout.to_json()});
  ClientOptions o;
  o.port = broker.port();
  o.layout = layout.to_json();
  SimNodeOptions so;
  so.bus = o;
  so.bus.name = "sim";
  SimNode sim(demo(), so);
  o.name = "replay";
  BusClient client(o);
  replay(ep, client, 1.0);
  std::this_thread::sleep_for(100ms);
  sim.stop();
  const auto s = sim.stats();
  const auto offline = track_commands(demo(), cmds);
  return {s.mean_r_track > 0.95 && s.missed_commands == 0,
          fmt("%zu commands replayed live: mean r_track %.4f (> 0.95), min %.4f; offline %.4f; "
              "60 s teleop run %.4f",
              cmds.size(), s.mean_r_track, s.min_r_track, offline.mean_r_track,
              live.sim.mean_r_track)};
}

}  // namespace
}  // namespace tw2

// An optional argument restricts the run to criteria whose name contains it.
int main(int argc, char** argv) {
  using namespace tw2;
  spdlog::set_level(spdlog::level::warn);
  const std::string only = argc > 1 ? argv[1] : "";
  int failed = 0, ran = 0;
  auto run = [&](const char* name, const std::function<Verdict()>& f) {
    if (std::string(name).find(only) == std::string::npos) return;
    ++ran;
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s  %-26s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  };
  PipelineReport live;
  run("self-retarget oracle", self_retarget);
  run("teleport invariance", teleport_invariance);
  run("grid-search oracle", grid_search);
  run("neck round trip", neck_round_trip);
  run("PD law and step response", pd_law);
  run("end-to-end delay budget", [&] { return end_to_end(live); });
  run("resume safety", resume_safety);
  run("recorder properties", recorder_properties);
  run("chunk scheduler", [] { return chunk_scheduler(600.0); });
  run("pipeline tracking", [&] { return pipeline_tracking(live); });
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed;
}
