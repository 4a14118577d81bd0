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


// tw2: command-line front end for the teleoperation pipeline.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <system_error>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tw2/bridge.hpp"
#include "tw2/errors.hpp"
#include "tw2/inference.hpp"
#include "tw2/latency.hpp"
#include "tw2/motion.hpp"
#include "tw2/payloads.hpp"
#include "tw2/pipeline.hpp"
#include "tw2/policy.hpp"
#include "tw2/recorder.hpp"

namespace {

using namespace std::chrono_literals;
using namespace tw2;
using json = nlohmann::json;

enum Exit : int { kOk = 0, kConfig = 2, kRuntime = 3, kProtocol = 4 };

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

/// Sleeps until interrupted or `seconds` elapse (0 waits for a signal only).
void wait(double seconds) {
  const auto end = seconds > 0 ? std::chrono::steady_clock::now() +
                                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                         std::chrono::duration<double>(seconds))
                               : std::chrono::steady_clock::time_point::max();
  while (!g_interrupted && std::chrono::steady_clock::now() < end) {
    std::this_thread::sleep_for(20ms);
  }
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

struct BusFlags {
  std::string host = "127.0.0.1";
  std::uint16_t port = default_bus_port();

  void add(CLI::App* app) {
    app->add_option("--host", host, "Broker host");
    app->add_option("--port", port, "Broker port (env TW2_BUS_PORT)");
  }
  ClientOptions client(const std::string& name, const Layout& layout) const {
    ClientOptions o;
    o.host = host;
    o.port = port;
    o.name = name;
    o.layout = layout.to_json();
    return o;
  }
};

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ConfigError("endpoint must be host:port, got '" + s + "'");
  try {
    const int port = std::stoi(s.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
  } catch (const std::logic_error&) {
    throw ConfigError("bad port in endpoint '" + s + "'");
  }
}

std::string default_endpoint() {
  const char* env = std::getenv("TW2_POLICY_ENDPOINT");
  return env && *env ? env : "127.0.0.1:7449";
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::system_error(errno, std::generic_category(), "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------ subcommands

void add_broker(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("broker", "Run the message broker until interrupted");
  auto host = std::make_shared<std::string>("127.0.0.1");
  auto port = std::make_shared<std::uint16_t>(default_bus_port());
  auto model = std::make_shared<std::filesystem::path>(demo_model_path());
  auto adopt = std::make_shared<bool>(false);
  auto queue = std::make_shared<std::size_t>(1 << 14);
  app->add_option("--host", *host, "Bind address");
  app->add_option("--port", *port, "Port (env TW2_BUS_PORT)");
  app->add_option("--model", *model, "Model whose layout the broker enforces");
  app->add_flag("--adopt-layout", *adopt, "Adopt the first client's layout instead");
  app->add_option("--queue", *queue, "Per-subscriber queue limit");
  app->callback([=, &run] {
    run = [=] {
      BrokerConfig c{*host, *port, json(), *queue};
      if (!*adopt) c.layout = Layout::for_model(load_model(*model)).to_json();
      Broker broker(c);
      spdlog::info("broker listening on {}:{}", *host, broker.port());
      wait(0);
      const auto s = broker.stats();
      broker.stop();
      print({{"received", s.received}, {"delivered", s.delivered}, {"dropped", s.dropped},
             {"protocol_errors", s.protocol_errors}});
      return kOk;
    };
  });
}

void add_teleop(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("teleop", "Run pose source, retarget, sim and recorder");
  auto config_file = std::make_shared<std::filesystem::path>();
  auto c = std::make_shared<PipelineConfig>();
  auto source = std::make_shared<std::string>();
  auto no_broker = std::make_shared<bool>(false);
  auto no_sim = std::make_shared<bool>(false);
  app->add_option("--config", *config_file, "YAML config; flags override it")->check(CLI::ExistingFile);
  app->add_option("--model", c->model_path, "Robot model YAML");
  app->add_option("--source", *source, "synthetic-walk, pose-file or bus-topic");
  app->add_option("--pose-file", c->pose_file, "Pose file for --source pose-file");
  app->add_option("--seed", c->seed, "Synthetic motion seed");
  app->add_option("--duration", c->duration_s, "Run limit in seconds (0: until the source ends)");
  app->add_option("--pose-hz", c->pose_hz);
  app->add_option("--cmd-hz", c->cmd_hz);
  app->add_option("--sim-hz", c->sim_hz);
  app->add_option("--record-hz", c->record_hz);
  app->add_option("--interp", c->interp_duration_s, "Resume blend duration, s");
  app->add_option("--host", c->host);
  app->add_option("--port", c->bus_port, "Bus port (env TW2_BUS_PORT)");
  app->add_flag("--no-broker", *no_broker, "Use a running broker");
  app->add_flag("--no-sim", *no_sim, "Do not start the simulator");
  app->add_option("--record", c->record_path, "Episode file to record");
  app->callback([=, &run] {
    run = [=] {
      PipelineConfig cfg = config_file->empty() ? PipelineConfig{} : PipelineConfig::from_yaml(*config_file);
      // Flags given on the command line win over the file.
      auto given = [&](const char* name) { return app->count(name) > 0; };
      if (given("--model")) cfg.model_path = c->model_path;
      if (given("--source")) cfg.source = parse_pose_source(*source);
      if (given("--pose-file")) cfg.pose_file = c->pose_file;
      if (given("--seed")) cfg.seed = c->seed;
      if (given("--duration")) cfg.duration_s = c->duration_s;
      if (given("--pose-hz")) cfg.pose_hz = c->pose_hz;
      if (given("--cmd-hz")) cfg.cmd_hz = c->cmd_hz;
      if (given("--sim-hz")) cfg.sim_hz = c->sim_hz;
      if (given("--record-hz")) cfg.record_hz = c->record_hz;
      if (given("--interp")) cfg.interp_duration_s = c->interp_duration_s;
      if (given("--host")) cfg.host = c->host;
      if (given("--port")) cfg.bus_port = c->bus_port;
      if (given("--record")) cfg.record_path = c->record_path;
      if (*no_broker) cfg.start_broker = false;
      if (*no_sim) cfg.start_sim = false;
      const auto report = run_teleop(cfg, &g_interrupted);
      print(report.to_json());
      return kOk;
    };
  });
}

void add_sim(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("sim", "Run the tracker simulator on the bus");
  auto bus = std::make_shared<BusFlags>();
  auto model = std::make_shared<std::filesystem::path>(demo_model_path());
  auto rate = std::make_shared<double>(50.0);
  auto duration = std::make_shared<double>(0.0);
  bus->add(app);
  app->add_option("--model", *model);
  app->add_option("--rate", *rate, "Step and STATE rate, Hz");
  app->add_option("--duration", *duration, "Seconds (0: until interrupted)");
  app->callback([=, &run] {
    run = [=] {
      const auto m = load_model(*model);
      SimNodeOptions o;
      o.bus = bus->client("sim", Layout::for_model(m));
      o.rate_hz = *rate;
      SimNode sim(m, o);
      wait(*duration);
      sim.stop();
      const auto s = sim.stats();
      print({{"steps", s.steps}, {"commands", s.commands}, {"missed_commands", s.missed_commands},
             {"mean_r_track", s.mean_r_track}, {"min_r_track", s.min_r_track}});
      return kOk;
    };
  });
}

void add_record(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("record", "Record CMD, STATE, FRAME and marks to an episode file");
  auto bus = std::make_shared<BusFlags>();
  auto out = std::make_shared<std::filesystem::path>();
  auto model = std::make_shared<std::filesystem::path>(demo_model_path());
  auto hz = std::make_shared<double>(30.0);
  auto duration = std::make_shared<double>(0.0);
  bus->add(app);
  app->add_option("out", *out, "Output .tw2e")->required();
  app->add_option("--model", *model);
  app->add_option("--hz", *hz, "Record rate");
  app->add_option("--duration", *duration, "Seconds (0: until interrupted)");
  app->callback([=, &run] {
    run = [=] {
      if (!(*hz >= 1.0)) throw ConfigError("record rate must be at least 1 Hz");
      const auto m = load_model(*model);
      EpisodeHeader h;
      h.layout = Layout::for_model(m);
      h.model_hash = model_hash(*model);
      h.created_at_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
      RecorderOptions ro;
      ro.record_hz = *hz;
      Recorder rec(bus->client("recorder", h.layout), *out, h, ro);
      wait(*duration);
      print({{"path", out->string()}, {"records", rec.stop()}});
      return kOk;
    };
  });
}

void add_segment(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("segment", "Split an episode file on its marks");
  auto in = std::make_shared<std::filesystem::path>();
  auto dir = std::make_shared<std::filesystem::path>(".");
  app->add_option("in", *in)->required()->check(CLI::ExistingFile);
  app->add_option("--out-dir", *dir, "Directory for <stem>_NNN.tw2e");
  app->callback([=, &run] {
    run = [=] {
      const auto result = segment(read_episode(*in));
      std::filesystem::create_directories(*dir);
      json files = json::array();
      for (std::size_t i = 0; i < result.episodes.size(); ++i) {
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "_%03zu.tw2e", i);
        const auto path = *dir / (in->stem().string() + suffix);
        write_episode(path, result.episodes[i]);
        files.push_back(path.string());
      }
      auto j = result.report.to_json();
      j["files"] = files;
      print(j);
      return kOk;
    };
  });
}

void add_filter(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("filter", "Compress idle stretches of an episode");
  auto in = std::make_shared<std::filesystem::path>();
  auto out = std::make_shared<std::filesystem::path>();
  auto eps = std::make_shared<double>(1e-3);
  auto min_s = std::make_shared<double>(2.0);
  app->add_option("in", *in)->required()->check(CLI::ExistingFile);
  app->add_option("out", *out)->required();
  app->add_option("--eps", *eps, "Idle threshold on the command change (infinity norm)");
  app->add_option("--min-duration", *min_s, "Minimum idle run length, s");
  app->callback([=, &run] {
    run = [=] {
      if (!(*eps >= 0.0) || !(*min_s > 0.0)) throw ConfigError("need eps >= 0 and min-duration > 0");
      auto [ep, report] = filter_idle(read_episode(*in), *eps, *min_s);
      write_episode(*out, ep);
      print(report.to_json());
      return kOk;
    };
  });
}

void add_replay(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("replay", "Publish an episode's commands on the bus");
  auto bus = std::make_shared<BusFlags>();
  auto in = std::make_shared<std::filesystem::path>();
  auto speed = std::make_shared<double>(1.0);
  bus->add(app);
  app->add_option("in", *in)->required()->check(CLI::ExistingFile);
  app->add_option("--speed", *speed, "Playback speed factor");
  app->callback([=, &run] {
    run = [=] {
      if (!(*speed > 0.0)) throw ConfigError("speed must be positive");
      const auto ep = read_episode(*in);
      BusClient client(bus->client("replay", ep.header.layout));
      const auto r = replay(ep, client, *speed, &g_interrupted);
      print({{"published", r.published}, {"wall_s", r.wall_s}});
      return kOk;
    };
  });
}

void add_run_policy(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("run-policy", "Execute action chunks from an inference endpoint");
  auto bus = std::make_shared<BusFlags>();
  auto model = std::make_shared<std::filesystem::path>(demo_model_path());
  auto endpoint = std::make_shared<std::string>(default_endpoint());
  auto stats_file = std::make_shared<std::filesystem::path>();
  auto duration = std::make_shared<double>(0.0);
  auto rt = std::make_shared<int>(50);
  bus->add(app);
  app->add_option("--model", *model);
  app->add_option("--endpoint", *endpoint, "host:port (env TW2_POLICY_ENDPOINT)");
  app->add_option("--stats", *stats_file, "Normalization stats JSON from `tw2 stats`");
  app->add_option("--duration", *duration, "Seconds (0: until interrupted)");
  app->add_option("--rt-priority", *rt, "SCHED_FIFO priority of the tick thread (0: off)");
  app->callback([=, &run] {
    run = [=] {
      const auto layout = Layout::for_model(load_model(*model));
      PolicyRunnerConfig cfg;
      std::tie(cfg.endpoint_host, cfg.endpoint_port) = parse_endpoint(*endpoint);
      cfg.realtime_priority = *rt;
      if (!stats_file->empty()) {
        cfg.stats = NormalizationStats::from_json(read_json(*stats_file).at("normalization"));
        if (cfg.stats->size() != layout.command_dim()) {
          throw ConfigError("stats do not match the model's command layout");
        }
      }
      auto opts = bus->client("policy", layout);
      opts.subscribe = {MsgType::kFrame};
      BusClient client(opts);
      PolicyRunner runner(layout, cfg, bus_sink(client));
      const auto end = *duration > 0 ? std::chrono::steady_clock::now() +
                                           std::chrono::milliseconds(static_cast<int>(*duration * 1000))
                                     : std::chrono::steady_clock::time_point::max();
      while (!g_interrupted && std::chrono::steady_clock::now() < end) {
        if (auto m = client.receive(20ms)) runner.set_image(m->payload);
      }
      runner.stop();
      const auto s = runner.stats();
      print({{"emissions", s.emissions}, {"emit_rate_hz", s.emit_rate_hz()},
             {"inference_ok", s.inference_ok}, {"inference_failed", s.inference_failed},
             {"inference_rate_hz", s.inference_rate_hz()}, {"starved_ticks", s.starved_ticks},
             {"fallback_ticks", s.fallback_ticks}});
      return kOk;
    };
  });
}

void add_gen_motion(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("gen-motion", "Write a synthetic human motion pose file");
  auto kind = std::make_shared<std::string>();
  auto out = std::make_shared<std::filesystem::path>();
  auto model = std::make_shared<std::filesystem::path>(demo_model_path());
  auto duration = std::make_shared<double>(10.0);
  auto seed = std::make_shared<std::uint64_t>(7);
  auto rate = std::make_shared<double>(100.0);
  app->add_option("kind", *kind, "walk, crouch, reach or head-scan")->required();
  app->add_option("out", *out, "Output pose file")->required();
  app->add_option("--model", *model);
  app->add_option("--duration", *duration, "Seconds");
  app->add_option("--seed", *seed);
  app->add_option("--rate", *rate, "Frame rate, Hz");
  app->callback([=, &run] {
    run = [=] {
      MotionKind k;
      try {
        k = parse_motion_kind(*kind);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      if (!(*duration > 0.0)) throw ConfigError("duration must be positive");
      const auto frames = gen_synthetic_motion(load_model(*model), k, *duration, *seed, *rate);
      PoseFileInfo info{std::string(motion_kind_name(k)), *seed, *rate, {}};
      for (const auto& [name, entry] : frames.front().links()) info.links.push_back(name);
      write_pose_file(*out, info, frames);
      print({{"path", out->string()}, {"frames", frames.size()}});
      return kOk;
    };
  });
}

void add_latency(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("latency", "Measure bus round-trip latency");
  auto bus = std::make_shared<BusFlags>();
  auto count = std::make_shared<std::size_t>(200);
  auto interval = std::make_shared<int>(10);
  auto self_echo = std::make_shared<bool>(false);
  bus->add(app);
  app->add_option("--count", *count, "Probes");
  app->add_option("--interval-ms", *interval, "Probe spacing");
  app->add_flag("--self-echo", *self_echo, "Start an echo peer in this process");
  app->callback([=, &run] {
    run = [=] {
      ClientOptions o;
      o.host = bus->host;
      o.port = bus->port;
      o.name = "latency";
      o.subscribe = {MsgType::kLatency};
      std::unique_ptr<EchoPeer> peer;
      if (*self_echo) {
        auto e = o;
        e.name = "echo";
        peer = std::make_unique<EchoPeer>(e);
      }
      BusClient client(o);
      const auto r = measure_latency(client, *count, std::chrono::milliseconds(*interval));
      print({{"sent", r.sent}, {"rtt_p50_ms", r.p50_ms}, {"rtt_p99_ms", r.p99_ms},
             {"rtt_max_ms", r.max_ms}, {"one_way_p99_ms", r.one_way_p99_ms()}});
      return kOk;
    };
  });
}

void add_echo_peer(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("echo-peer", "Answer LATENCY probes until interrupted");
  auto bus = std::make_shared<BusFlags>();
  bus->add(app);
  app->callback([=, &run] {
    run = [=] {
      ClientOptions o;
      o.host = bus->host;
      o.port = bus->port;
      o.name = "echo";
      EchoPeer peer(o);
      wait(0);
      print({{"echoed", peer.echoed()}});
      return kOk;
    };
  });
}

void add_stats(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("stats", "Per-dimension statistics over episode files");
  auto files = std::make_shared<std::vector<std::filesystem::path>>();
  auto out = std::make_shared<std::filesystem::path>();
  app->add_option("files", *files)->required()->check(CLI::ExistingFile);
  app->add_option("--out", *out, "Write the JSON here instead of stdout");
  app->callback([=, &run] {
    run = [=] {
      std::vector<Episode> eps;
      for (const auto& f : *files) eps.push_back(read_episode(f));
      for (const auto& e : eps) {
        if (!(e.header.layout == eps.front().header.layout)) {
          throw ConfigError("episodes have different layouts");
        }
      }
      const auto j = episode_stats(eps).to_json(eps.front().header.layout);
      if (out->empty()) print(j);
      else write_json(*out, j);
      return kOk;
    };
  });
}

void add_echo_policy(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("echo-policy", "Serve an identity policy endpoint");
  auto o = std::make_shared<EchoPolicyOptions>();
  o->port = 7449;
  auto latency = std::make_shared<int>(0);
  app->add_option("--host", o->host);
  app->add_option("--port", o->port);
  app->add_option("--latency-ms", *latency, "Artificial response delay");
  app->add_option("--steps", o->steps, "Chunk length to answer with");
  app->callback([=, &run] {
    run = [=] {
      auto opts = *o;
      opts.latency = std::chrono::milliseconds(*latency);
      EchoPolicyServer server(opts);
      spdlog::info("echo policy on {}:{}", opts.host, server.port());
      wait(0);
      print({{"served", server.served()}});
      return kOk;
    };
  });
}

void add_ctrl(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("ctrl", "Send a session event or mark and print the verdict");
  auto bus = std::make_shared<BusFlags>();
  auto event = std::make_shared<std::string>();
  bus->add(app);
  app->add_option("event", *event,
                  "start, pause, resume, stop, estop, episode_start, episode_end or failure")
      ->required();
  app->callback([=, &run] {
    run = [=] {
      CtrlCode code;
      try {
        code = parse_ctrl(*event);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      ClientOptions o;
      o.host = bus->host;
      o.port = bus->port;
      o.name = "ctrl";
      o.subscribe = {MsgType::kCtrl};
      BusClient client(o);
      const auto seq = client.publish(MsgType::kCtrl, encode_ctrl({code, std::nullopt}));
      (void)seq;
      const auto deadline = std::chrono::steady_clock::now() + 2s;
      while (std::chrono::steady_clock::now() < deadline) {
        auto m = client.receive(100ms);
        if (!m || !(m->flags & kFlagReply)) continue;
        const auto c = decode_ctrl(*m);
        const bool ok = (m->flags & kFlagAck) != 0;
        print({{"event", ctrl_name(c.code)}, {"ok", ok},
               {"mode", c.mode ? std::string(mode_name(*c.mode)) : ""}});
        return ok ? kOk : kProtocol;
      }
      throw TimeoutError("no verdict from the broker");
    };
  });
}

void add_bridge(CLI::App& root, std::function<int()>& run) {
  auto* app = root.add_subcommand("bridge", "Websocket bridge for the operator console");
  auto bus = std::make_shared<BusFlags>();
  auto c = std::make_shared<BridgeConfig>();
  c->port = default_bridge_port();
  app->add_option("--bus-host", bus->host);
  app->add_option("--bus-port", bus->port, "Broker port (env TW2_BUS_PORT)");
  app->add_option("--host", c->host, "Websocket bind address");
  app->add_option("--port", c->port, "Websocket port (env TW2_BRIDGE_PORT)");
  app->add_option("--view-hz", c->view_hz, "STATE/CMD forwarding cap");
  app->callback([=, &run] {
    run = [=] {
      auto cfg = *c;
      cfg.bus.host = bus->host;
      cfg.bus.port = bus->port;
      cfg.bus.name = "bridge";
      Bridge bridge(cfg);
      spdlog::info("bridge on ws://{}:{}", cfg.host, bridge.port());
      wait(0);
      bridge.stop();
      return kOk;
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("tw2"));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);

  CLI::App app{"Humanoid teleoperation pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  std::function<int()> run;
  add_broker(app, run);
  add_teleop(app, run);
  add_sim(app, run);
  add_record(app, run);
  add_segment(app, run);
  add_filter(app, run);
  add_replay(app, run);
  add_run_policy(app, run);
  add_gen_motion(app, run);
  add_latency(app, run);
  add_echo_peer(app, run);
  add_stats(app, run);
  add_echo_policy(app, run);
  add_ctrl(app, run);
  add_bridge(app, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    return run();
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const ValidationError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const DimensionError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const FormatError& e) {
    spdlog::error("input: {}", e.what());
    return kConfig;
  } catch (const ProtocolError& e) {
    spdlog::error("protocol: {}", e.what());
    return kProtocol;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
}
