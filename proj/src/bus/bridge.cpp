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


#include "tw2/bridge.hpp"

#include <algorithm>
#include <cstring>

#include <spdlog/spdlog.h>

#include "tw2/command.hpp"
#include "tw2/payloads.hpp"
#include "tw2/websocket.hpp"

namespace tw2 {

using namespace std::chrono_literals;

struct Bridge::Console {
  Socket sock;
  std::mutex write_mu;
  std::atomic<bool> ready{false};
  std::atomic<bool> done{false};
  std::thread thread;
};

Bridge::Bridge(BridgeConfig config)
    : config_(std::move(config)), listener_(config_.host, config_.port) {
  if (!(config_.view_hz > 0.0)) throw ConfigError("bridge view rate must be positive");
  auto bus_opts = config_.bus;
  bus_opts.subscribe = {MsgType::kState, MsgType::kCmd, MsgType::kCtrl};
  if (bus_opts.name == "client") bus_opts.name = "bridge";
  bus_ = std::make_unique<BusClient>(bus_opts);
  layout_ = bus_->handshake().value("layout", nlohmann::json());
  const std::string m = bus_->handshake().value("mode", "IDLE");
  for (std::uint8_t i = 0; i <= 4; ++i) {
    if (mode_name(static_cast<Mode>(i)) == m) mode_ = static_cast<Mode>(i);
  }
  acceptor_ = std::thread([this] { accept_loop(); });
  pump_ = std::thread([this] { bus_loop(); });
}

Bridge::~Bridge() { stop(); }

void Bridge::stop() {
  if (!running_.exchange(false)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  if (pump_.joinable()) pump_.join();
  std::vector<std::shared_ptr<Console>> all;
  {
    std::lock_guard lock(mu_);
    all.swap(consoles_);
  }
  for (auto& c : all) c->sock.shutdown();
  for (auto& c : all) {
    if (c->thread.joinable()) c->thread.join();
  }
  bus_->close();
}

std::size_t Bridge::clients() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      consoles_.begin(), consoles_.end(), [](const auto& c) { return c->ready && !c->done; }));
}

Mode Bridge::mode() const {
  std::lock_guard lock(mu_);
  return mode_;
}

nlohmann::json Bridge::hello() const {
  nlohmann::json j{{"type", "hello"}, {"version", kWireVersion}, {"mode", mode_name(mode_)},
                   {"layout", layout_}, {"view_hz", config_.view_hz}};
  if (!layout_.is_null()) {
    const Layout l = Layout::from_json(layout_);
    j["command_names"] = l.command_names();
    j["state_names"] = l.state_names();
  }
  return j;
}

void Bridge::accept_loop() {
  while (running_) {
    std::optional<Socket> s;
    try {
      s = listener_.accept(100ms);
    } catch (const std::exception& e) {
      if (running_) spdlog::error("bridge accept failed: {}", e.what());
      break;
    }
    std::vector<std::shared_ptr<Console>> dead;
    {
      std::lock_guard lock(mu_);
      auto it = std::stable_partition(consoles_.begin(), consoles_.end(),
                                      [](const auto& c) { return !c->done; });
      dead.assign(it, consoles_.end());
      consoles_.erase(it, consoles_.end());
    }
    for (auto& c : dead) {
      if (c->thread.joinable()) c->thread.join();
    }
    if (!s) continue;
    auto c = std::make_shared<Console>();
    c->sock = std::move(*s);
    std::lock_guard lock(mu_);
    consoles_.push_back(c);
    c->thread = std::thread([this, c] { serve(c); });
  }
}

void Bridge::serve(const std::shared_ptr<Console>& c) {
  try {
    ws::accept_upgrade(c->sock, ws::read_request(c->sock, 2000ms));
    {
      std::lock_guard lock(mu_);
      send(*c, hello());
      c->ready = true;
    }
    while (running_ && !c->done) {
      auto f = ws::read_frame(c->sock, 100ms, true);
      if (!f) continue;
      if (f->opcode == ws::kClose) {
        std::lock_guard lock(c->write_mu);
        write_all(c->sock, ws::encode(ws::kClose, f->payload));
        break;
      }
      if (f->opcode == ws::kPing) {
        std::lock_guard lock(c->write_mu);
        write_all(c->sock, ws::encode(ws::kPong, f->payload));
        continue;
      }
      if (f->opcode == ws::kText && f->fin) handle_console(f->text(), *c);
    }
  } catch (const std::exception& e) {
    if (running_) spdlog::debug("bridge: console closed: {}", e.what());
  }
  c->done = true;
  c->sock.shutdown();
}

void Bridge::handle_console(const std::string& text, Console& c) {
  CtrlCode code;
  try {
    const auto j = nlohmann::json::parse(text);
    const std::string type = j.at("type");
    if (type == "ctrl") {
      code = parse_ctrl(j.at("event").get<std::string>());
      if (!is_transition(code) || code == CtrlCode::kInterpDone) {
        throw std::invalid_argument("not an operator event");
      }
    } else if (type == "mark") {
      code = parse_ctrl(j.at("kind").get<std::string>());
      if (!is_mark(code)) throw std::invalid_argument("not a mark kind");
    } else {
      throw std::invalid_argument("unknown message type '" + type + "'");
    }
  } catch (const std::exception& e) {
    send(c, {{"type", "error"}, {"message", e.what()}});
    return;
  }
  try {
    bus_->publish(MsgType::kCtrl, encode_ctrl({code, std::nullopt}));
  } catch (const std::exception& e) {
    send(c, {{"type", "ack"}, {"event", ctrl_name(code)}, {"ok", false},
             {"error", e.what()}});
  }
}

void Bridge::send(Console& c, const nlohmann::json& j) {
  const std::string text = j.dump();
  const auto frame = ws::encode(
      ws::kText, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  std::lock_guard lock(c.write_mu);
  try {
    write_all(c.sock, frame);
  } catch (const ProtocolError&) {
    c.done = true;
  }
}

void Bridge::broadcast(const nlohmann::json& j) {
  std::vector<std::shared_ptr<Console>> targets;
  {
    std::lock_guard lock(mu_);
    targets = consoles_;
  }
  for (auto& c : targets) {
    if (c->ready && !c->done) send(*c, j);
  }
}

void Bridge::bus_loop() {
  const auto period = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / config_.view_hz));
  auto next_view = std::chrono::steady_clock::now();
  std::optional<nlohmann::json> cmd, state;
  while (running_) {
    auto m = bus_->receive(10ms);
    if (m) {
      try {
        switch (m->type) {
          case MsgType::kCmd:
            cmd = nlohmann::json{{"type", "cmd"}, {"t", m->timestamp_ns},
                                 {"values", decode_doubles(m->payload)}};
            break;
          case MsgType::kState: {
            if (m->payload.size() < 8) throw ProtocolError("short STATE payload");
            std::int64_t origin = 0;
            std::memcpy(&origin, m->payload.data(), sizeof(origin));
            state = nlohmann::json{
                {"type", "state"},
                {"t", m->timestamp_ns},
                {"cmd_origin_ns", origin},
                {"delay_ms", static_cast<double>(now_ns() - origin) * 1e-6},
                {"values", decode_doubles(std::span(m->payload).subspan(8))}};
            break;
          }
          case MsgType::kCtrl: {
            const auto p = decode_ctrl(*m);
            const bool ok = m->flags & kFlagAck;
            std::string mode_text;
            {
              std::lock_guard lock(mu_);
              if (ok && p.mode) mode_ = *p.mode;
              mode_text = mode_name(mode_);
            }
            const bool reply = m->flags & kFlagReply;
            broadcast({{"type", reply ? "ack" : "session"},
                       {"event", ctrl_name(p.code)},
                       {"ok", ok},
                       {"mark", is_mark(p.code)},
                       {"t", m->timestamp_ns},
                       {"mode", mode_text}});
            break;
          }
          default:
            break;
        }
      } catch (const std::exception& e) {
        spdlog::warn("bridge: skipping {} message: {}", type_name(m->type), e.what());
      }
    } else if (!bus_->connected()) {
      broadcast({{"type", "error"}, {"message", "bus disconnected: " + bus_->error()}});
      break;
    }
    const auto now = std::chrono::steady_clock::now();
    if (now >= next_view) {
      if (cmd) broadcast(*cmd);
      if (state) broadcast(*state);
      cmd.reset();
      state.reset();
      next_view += period;
      if (next_view < now) next_view = now + period;
    }
  }
}

}  // namespace tw2
