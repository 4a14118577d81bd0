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


#include "tw2/bus.hpp"

#include <algorithm>
#include <cstring>

#include <spdlog/spdlog.h>

#include "tw2/payloads.hpp"

namespace tw2 {
namespace {

constexpr auto kPollSlice = std::chrono::milliseconds(100);

std::size_t slot(MsgType t) { return static_cast<std::size_t>(t); }

Message handshake_message(const nlohmann::json& j, std::uint8_t flags = 0) {
  const std::string text = j.dump();
  return {MsgType::kHandshake, flags, 1, static_cast<std::uint64_t>(now_ns()),
          std::vector<std::uint8_t>(text.begin(), text.end())};
}

}  // namespace

std::uint16_t default_bus_port() { return port_from_env("TW2_BUS_PORT", kDefaultBusPort); }
std::uint16_t default_bridge_port() {
  return port_from_env("TW2_BRIDGE_PORT", kDefaultBridgePort);
}

// ---------------------------------------------------------------- client --

BusClient::BusClient(ClientOptions options) : options_(std::move(options)) {
  sock_ = connect_tcp(options_.host, options_.port, options_.timeout);
  nlohmann::json hello{{"version", kWireVersion}, {"name", options_.name}};
  hello["subscribe"] = nlohmann::json::array();
  for (MsgType t : options_.subscribe) hello["subscribe"].push_back(type_name(t));
  hello["layout"] = options_.layout;
  write_message(sock_, handshake_message(hello));

  const auto reply = read_message(sock_, options_.timeout);
  if (!reply) throw TimeoutError("broker did not answer the handshake");
  if (reply->type != MsgType::kHandshake) throw ProtocolError("expected handshake reply");
  try {
    handshake_ = nlohmann::json::parse(reply->payload.begin(), reply->payload.end());
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad handshake reply: ") + e.what());
  }
  if (reply->flags & kFlagError) {
    throw ProtocolError("broker rejected handshake: " + handshake_.value("error", "unknown"));
  }
  connected_ = true;
  reader_ = std::thread([this] { read_loop(); });
}

BusClient::~BusClient() { close(); }

void BusClient::close() {
  closing_ = true;
  sock_.shutdown();
  if (reader_.joinable()) reader_.join();
  connected_ = false;
  cv_.notify_all();
}

std::string BusClient::error() const {
  std::lock_guard lock(mu_);
  return error_;
}

std::uint32_t BusClient::publish(MsgType type, std::span<const std::uint8_t> payload,
                                 std::optional<std::uint64_t> timestamp_ns, std::uint8_t flags) {
  if (payload.size() > kMaxPayload) throw ProtocolError("payload exceeds 4 MiB");
  std::lock_guard lock(write_mu_);
  if (!connected_) throw ProtocolError("not connected: " + error());
  Message m{type, flags, ++seq_[slot(type)],
            timestamp_ns.value_or(static_cast<std::uint64_t>(now_ns())),
            std::vector<std::uint8_t>(payload.begin(), payload.end())};
  try {
    write_message(sock_, m);
  } catch (const ProtocolError& e) {
    connected_ = false;
    {
      std::lock_guard l(mu_);
      error_ = e.what();
    }
    throw;
  }
  return m.seq;
}

std::optional<Message> BusClient::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || !connected_; });
  if (inbox_.empty()) return std::nullopt;
  Message m = std::move(inbox_.front());
  inbox_.pop_front();
  return m;
}

void BusClient::read_loop() {
  try {
    while (!closing_) {
      auto m = read_message(sock_, kPollSlice);
      if (!m) continue;
      std::lock_guard lock(mu_);
      if (inbox_.size() >= options_.queue_limit) {
        inbox_.pop_front();
        ++dropped_;
      }
      inbox_.push_back(std::move(*m));
      cv_.notify_one();
    }
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    if (!closing_) error_ = e.what();
  }
  connected_ = false;
  cv_.notify_all();
}

// ---------------------------------------------------------------- broker --

struct Broker::Conn {
  Socket sock;
  std::string name = "?";
  std::uint32_t subs = 0;
  bool ready = false;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> queue;
  bool closing = false;
  std::atomic<bool> done{false};
  std::thread reader;

  std::array<std::uint32_t, 10> out_seq{};
  std::array<std::uint32_t, 10> in_seq{};
  std::array<std::uint64_t, 10> in_ts{};
  std::array<bool, 10> seen{};
};

Broker::Broker(BrokerConfig config)
    : config_(std::move(config)), listener_(config_.host, config_.port) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

Broker::~Broker() { stop(); }

Mode Broker::mode() const {
  std::lock_guard lock(mu_);
  return mode_;
}

BrokerStats Broker::stats() const {
  std::lock_guard lock(mu_);
  BrokerStats s = stats_;
  s.connections = static_cast<std::size_t>(
      std::count_if(conns_.begin(), conns_.end(), [](const auto& c) { return !c->done; }));
  return s;
}

void Broker::stop() {
  if (!running_.exchange(false)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::shared_ptr<Conn>> conns;
  {
    std::lock_guard lock(mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) {
    {
      std::lock_guard lock(c->mu);
      c->closing = true;
    }
    c->cv.notify_all();
    c->sock.shutdown();
  }
  for (auto& c : conns) {
    if (c->reader.joinable()) c->reader.join();
  }
}

void Broker::accept_loop() {
  while (running_) {
    std::optional<Socket> s;
    try {
      s = listener_.accept(kPollSlice);
    } catch (const std::exception& e) {
      if (running_) spdlog::error("broker accept failed: {}", e.what());
      break;
    }
    reap();
    if (!s) continue;
    auto c = std::make_shared<Conn>();
    c->sock = std::move(*s);
    {
      std::lock_guard lock(mu_);
      conns_.push_back(c);
    }
    c->reader = std::thread([this, c] { serve(c); });
  }
}

void Broker::reap() {
  std::vector<std::shared_ptr<Conn>> dead;
  {
    std::lock_guard lock(mu_);
    auto it = std::stable_partition(conns_.begin(), conns_.end(),
                                    [](const auto& c) { return !c->done; });
    dead.assign(it, conns_.end());
    conns_.erase(it, conns_.end());
  }
  for (auto& c : dead) {
    if (c->reader.joinable()) c->reader.join();
  }
}

void Broker::serve(const std::shared_ptr<Conn>& c) {
  std::thread writer;
  try {
    if (handshake(c)) {
      writer = std::thread([this, c] { writer_loop(c); });
      while (running_) {
        auto m = read_message(c->sock, kPollSlice);
        if (m) route(c, std::move(*m));
        std::lock_guard lock(c->mu);
        if (c->closing) break;
      }
    }
  } catch (const ProtocolError& e) {
    if (running_) {
      const std::string what = e.what();
      if (what != "connection closed") {
        spdlog::warn("broker: dropping '{}': {}", c->name, what);
        std::lock_guard lock(mu_);
        ++stats_.protocol_errors;
      }
    }
  } catch (const std::exception& e) {
    spdlog::warn("broker: connection '{}' failed: {}", c->name, e.what());
  }
  {
    std::lock_guard lock(c->mu);
    c->closing = true;
    c->ready = false;
  }
  c->cv.notify_all();
  if (writer.joinable()) writer.join();
  c->sock.shutdown();
  c->done = true;
}

bool Broker::handshake(const std::shared_ptr<Conn>& c) {
  const auto m = read_message(c->sock, std::chrono::milliseconds(2000));
  if (!m) throw ProtocolError("no handshake within 2 s");
  if (m->type != MsgType::kHandshake) throw ProtocolError("first message must be HANDSHAKE");
  nlohmann::json hello;
  try {
    hello = nlohmann::json::parse(m->payload.begin(), m->payload.end());
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("handshake is not JSON: ") + e.what());
  }
  auto reject = [&](const std::string& why) {
    write_message(c->sock, handshake_message({{"error", why}}, kFlagError));
    std::lock_guard lock(mu_);
    ++stats_.protocol_errors;
    return false;
  };
  if (!hello.contains("version") || hello["version"] != kWireVersion) {
    return reject("protocol version mismatch: broker speaks " + std::to_string(kWireVersion));
  }
  std::uint32_t subs = 0;
  try {
    for (const auto& t : hello.value("subscribe", nlohmann::json::array())) {
      subs |= 1u << slot(parse_type(t.get<std::string>()));
    }
  } catch (const std::exception& e) {
    return reject(std::string("bad subscribe list: ") + e.what());
  }

  nlohmann::json reply;
  {
    std::lock_guard lock(mu_);
    const auto& layout = hello.value("layout", nlohmann::json());
    if (!layout.is_null()) {
      if (config_.layout.is_null()) {
        config_.layout = layout;
      } else if (layout != config_.layout) {
        ++stats_.protocol_errors;
        write_message(c->sock,
                      handshake_message({{"error", "layout descriptor mismatch"}}, kFlagError));
        return false;
      }
    }
    reply = {{"version", kWireVersion},
             {"name", "broker"},
             {"layout", config_.layout},
             {"mode", mode_name(mode_)}};
    c->name = hello.value("name", "?");
    c->subs = subs;
    // Ready before the reply goes out: anything published after the peer sees
    // the reply is queued for it. The writer starts only after the reply.
    std::lock_guard l(c->mu);
    c->ready = true;
  }
  write_message(c->sock, handshake_message(reply));
  return true;
}

void Broker::writer_loop(const std::shared_ptr<Conn>& c) {
  try {
    for (;;) {
      std::vector<std::uint8_t> bytes;
      {
        std::unique_lock lock(c->mu);
        c->cv.wait(lock, [&] { return c->closing || !c->queue.empty(); });
        if (c->closing) return;
        bytes = std::move(c->queue.front());
        c->queue.pop_front();
      }
      write_all(c->sock, bytes);
    }
  } catch (const std::exception& e) {
    std::lock_guard lock(c->mu);
    c->closing = true;
  }
  c->sock.shutdown();
}

void Broker::enqueue(Conn& c, std::shared_ptr<const std::vector<std::uint8_t>> bytes) {
  // Header seq is rewritten per subscriber so each sees a gap-free sequence
  // per topic unless the broker dropped for it.
  const auto type = static_cast<MsgType>((*bytes)[5]);
  std::lock_guard lock(c.mu);
  const std::uint32_t seq = ++c.out_seq[slot(type)];
  if (!c.ready || c.closing) return;
  if (c.queue.size() >= config_.queue_limit) {
    ++stats_.dropped;
    return;
  }
  std::vector<std::uint8_t> out(*bytes);
  std::memcpy(out.data() + 8, &seq, sizeof(seq));
  c.queue.push_back(std::move(out));
  ++stats_.delivered;
  c.cv.notify_one();
}

void Broker::fanout(MsgType type, std::uint8_t flags, std::uint64_t ts,
                    std::span<const std::uint8_t> payload, const Conn* except) {
  auto bytes = std::make_shared<const std::vector<std::uint8_t>>(
      encode({type, flags, 0, ts, std::vector<std::uint8_t>(payload.begin(), payload.end())}));
  for (auto& c : conns_) {
    if (c.get() == except || !(c->subs & (1u << slot(type)))) continue;
    enqueue(*c, bytes);
  }
}

void Broker::route(const std::shared_ptr<Conn>& from, Message m) {
  const std::size_t s = slot(m.type);
  if (m.type == MsgType::kHandshake) throw ProtocolError("duplicate HANDSHAKE");
  if (from->seen[s]) {
    if (m.seq <= from->in_seq[s]) {
      throw ProtocolError("seq " + std::to_string(m.seq) + " not increasing on " +
                          std::string(type_name(m.type)));
    }
    if (m.timestamp_ns < from->in_ts[s]) {
      throw ProtocolError("timestamp went backwards on " + std::string(type_name(m.type)));
    }
  }
  from->seen[s] = true;
  from->in_seq[s] = m.seq;
  from->in_ts[s] = m.timestamp_ns;

  if (m.type == MsgType::kCtrl) {
    handle_ctrl(from, m);
    return;
  }
  std::lock_guard lock(mu_);
  ++stats_.received;
  fanout(m.type, m.flags, m.timestamp_ns, m.payload, from.get());
}

void Broker::handle_ctrl(const std::shared_ptr<Conn>& from, const Message& m) {
  const CtrlPayload in = decode_ctrl(m);
  std::lock_guard lock(mu_);
  ++stats_.received;
  bool ok = true;
  if (is_transition(in.code)) {
    const auto next = next_mode(mode_, in.code);
    ok = next.has_value();
    if (ok && *next != mode_) {
      spdlog::info("session: {} -> {} ({} from '{}')", mode_name(mode_), mode_name(*next),
                   ctrl_name(in.code), from->name);
    }
    if (ok) mode_ = *next;
  }
  const auto payload = encode_ctrl({in.code, mode_});
  const std::uint8_t flags = ok ? kFlagAck : kFlagNack;
  auto reply = std::make_shared<const std::vector<std::uint8_t>>(
      encode({MsgType::kCtrl, static_cast<std::uint8_t>(flags | kFlagReply), 0, m.timestamp_ns,
              payload}));
  {
    // The sender always gets its verdict, subscribed or not.
    std::lock_guard l(from->mu);
    if (from->ready) {
      std::vector<std::uint8_t> out(*reply);
      const std::uint32_t seq = ++from->out_seq[slot(MsgType::kCtrl)];
      std::memcpy(out.data() + 8, &seq, sizeof(seq));
      from->queue.push_back(std::move(out));
      from->cv.notify_one();
    }
  }
  if (ok) fanout(MsgType::kCtrl, kFlagAck, m.timestamp_ns, payload, from.get());
}

}  // namespace tw2
