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

#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>

#include "tw2/latency.hpp"
#include "tw2/model.hpp"
#include "tw2/payloads.hpp"

namespace tw2 {
namespace {

using namespace std::chrono_literals;

const Layout& layout() {
  static const Layout l = Layout::for_model(load_model(demo_model_path()));
  return l;
}

ClientOptions opts(const Broker& b, std::string name, std::vector<MsgType> subs = {}) {
  ClientOptions o;
  o.port = b.port();
  o.name = std::move(name);
  o.subscribe = std::move(subs);
  o.layout = layout().to_json();
  return o;
}

std::unique_ptr<Broker> make_broker() {
  BrokerConfig c;
  c.port = 0;
  return std::make_unique<Broker>(c);
}

// Waits until the broker has registered `n` live connections.
void await_connections(const Broker& b, std::size_t n) {
  for (int i = 0; i < 200 && b.stats().connections != n; ++i) std::this_thread::sleep_for(5ms);
}

std::vector<std::uint8_t> cmd_payload(double x) {
  std::vector<double> flat(layout().command_dim(), x);
  return encode_cmd(layout(), unflatten_command(layout(), flat, 0));
}

TEST(Broker, HandshakeReportsLayoutAndMode) {
  auto b = make_broker();
  BusClient c(opts(*b, "a"));
  EXPECT_EQ(c.handshake()["version"], kWireVersion);
  EXPECT_EQ(Layout::from_json(c.handshake()["layout"]), layout());
  EXPECT_EQ(c.handshake()["mode"], "IDLE");
}

TEST(Broker, LayoutMismatchRejected) {
  auto b = make_broker();
  BusClient first(opts(*b, "a"));
  auto o = opts(*b, "b");
  o.layout["body"].erase(0);
  EXPECT_THROW(BusClient{o}, ProtocolError);
}

TEST(Broker, VersionMismatchRejected) {
  auto b = make_broker();
  Socket s = connect_tcp("127.0.0.1", b->port());
  const std::string hello = R"({"version": 99, "name": "old"})";
  write_message(s, {MsgType::kHandshake, 0, 1, 1, {hello.begin(), hello.end()}});
  const auto reply = read_message(s, 2000ms);
  ASSERT_TRUE(reply);
  EXPECT_TRUE(reply->flags & kFlagError);
  EXPECT_THROW(read_message(s, 2000ms), ProtocolError);
}

TEST(Broker, FanoutExcludesSenderAndRestamps) {
  auto b = make_broker();
  BusClient pub(opts(*b, "pub", {MsgType::kCmd}));
  BusClient sub(opts(*b, "sub", {MsgType::kCmd}));
  BusClient other(opts(*b, "other", {MsgType::kState}));
  pub.publish(MsgType::kCmd, cmd_payload(1.0), 100);
  pub.publish(MsgType::kCmd, cmd_payload(2.0), 200);
  for (std::uint32_t seq : {1u, 2u}) {
    auto m = sub.receive(2s);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->seq, seq);
    EXPECT_EQ(m->timestamp_ns, 100u * seq);
    EXPECT_EQ(decode_cmd(layout(), *m).vx, static_cast<double>(seq));
  }
  EXPECT_FALSE(pub.receive(100ms));
  EXPECT_FALSE(other.receive(100ms));
}

TEST(Broker, MalformedFrameIsolated) {
  auto b = make_broker();
  BusClient pub(opts(*b, "pub"));
  BusClient sub(opts(*b, "sub", {MsgType::kCmd}));
  Socket rogue = connect_tcp("127.0.0.1", b->port());
  const std::string hello = R"({"version": 1, "name": "rogue"})";
  write_message(rogue, {MsgType::kHandshake, 0, 1, 1, {hello.begin(), hello.end()}});
  ASSERT_TRUE(read_message(rogue, 2000ms));
  const std::vector<std::uint8_t> junk(40, 0xab);
  write_all(rogue, junk);
  EXPECT_THROW(
      {
        while (true) read_message(rogue, 2000ms);
      },
      ProtocolError);

  pub.publish(MsgType::kCmd, cmd_payload(3.0));
  auto m = sub.receive(2s);
  ASSERT_TRUE(m);
  EXPECT_EQ(decode_cmd(layout(), *m).vx, 3.0);
  EXPECT_GE(b->stats().protocol_errors, 1u);
  EXPECT_TRUE(pub.connected());
}

TEST(Broker, NonIncreasingSeqDropsPublisher) {
  auto b = make_broker();
  BusClient sub(opts(*b, "sub", {MsgType::kCmd}));
  Socket raw = connect_tcp("127.0.0.1", b->port());
  const std::string hello = R"({"version": 1, "name": "raw"})";
  write_message(raw, {MsgType::kHandshake, 0, 1, 1, {hello.begin(), hello.end()}});
  ASSERT_TRUE(read_message(raw, 2000ms));
  write_message(raw, {MsgType::kCmd, 0, 5, 10, cmd_payload(1.0)});
  write_message(raw, {MsgType::kCmd, 0, 5, 20, cmd_payload(2.0)});
  EXPECT_THROW(
      {
        while (true) read_message(raw, 2000ms);
      },
      ProtocolError);
  auto m = sub.receive(2s);
  ASSERT_TRUE(m);
  EXPECT_EQ(decode_cmd(layout(), *m).vx, 1.0);
  EXPECT_FALSE(sub.receive(200ms));
}

TEST(Broker, BackwardTimestampDropsPublisher) {
  auto b = make_broker();
  Socket raw = connect_tcp("127.0.0.1", b->port());
  const std::string hello = R"({"version": 1})";
  write_message(raw, {MsgType::kHandshake, 0, 1, 1, {hello.begin(), hello.end()}});
  ASSERT_TRUE(read_message(raw, 2000ms));
  write_message(raw, {MsgType::kCmd, 0, 1, 20, cmd_payload(1.0)});
  write_message(raw, {MsgType::kCmd, 0, 2, 10, cmd_payload(2.0)});
  EXPECT_THROW(
      {
        while (true) read_message(raw, 2000ms);
      },
      ProtocolError);
}

TEST(Broker, FirstMessageMustBeHandshake) {
  auto b = make_broker();
  Socket raw = connect_tcp("127.0.0.1", b->port());
  write_message(raw, {MsgType::kCmd, 0, 1, 20, cmd_payload(1.0)});
  EXPECT_THROW(
      {
        while (true) read_message(raw, 2000ms);
      },
      ProtocolError);
}

TEST(Broker, MidStreamJoinSeesOnlyLaterMessages) {
  auto b = make_broker();
  BusClient pub(opts(*b, "pub"));
  for (int i = 0; i < 5; ++i) pub.publish(MsgType::kCmd, cmd_payload(i));
  std::this_thread::sleep_for(50ms);
  BusClient late(opts(*b, "late", {MsgType::kCmd}));
  pub.publish(MsgType::kCmd, cmd_payload(5.0));
  auto m = late.receive(2s);
  ASSERT_TRUE(m);
  EXPECT_EQ(decode_cmd(layout(), *m).vx, 5.0);
  EXPECT_EQ(m->seq, 1u);
  EXPECT_FALSE(late.receive(100ms));
}

TEST(Broker, ThousandCommandsAtFiftyHzInOrder) {
  auto b = make_broker();
  BusClient pub(opts(*b, "pub"));
  BusClient sub(opts(*b, "sub", {MsgType::kCmd}));
  constexpr int kCount = 1000;
  std::vector<double> one_way_ms;
  std::thread consumer([&] {
    for (int i = 0; i < kCount; ++i) {
      auto m = sub.receive(2s);
      if (!m) break;
      one_way_ms.push_back(static_cast<double>(now_ns() - static_cast<std::int64_t>(m->timestamp_ns)) * 1e-6);
      if (decode_cmd(layout(), *m).vx != static_cast<double>(i)) break;
    }
  });
  auto next = std::chrono::steady_clock::now();
  for (int i = 0; i < kCount; ++i) {
    std::this_thread::sleep_until(next);
    next += 20ms;
    pub.publish(MsgType::kCmd, cmd_payload(i));
  }
  consumer.join();
  ASSERT_EQ(one_way_ms.size(), static_cast<std::size_t>(kCount)) << "reordered or lost";
  const double p99 = percentile(one_way_ms, 99);
  RecordProperty("one_way_p99_ms", std::to_string(p99));
  EXPECT_LT(p99, 5.0);
  EXPECT_EQ(b->stats().dropped, 0u);
  EXPECT_EQ(sub.dropped(), 0u);
}

TEST(Latency, LoopbackRoundTrip) {
  auto b = make_broker();
  EchoPeer echo(opts(*b, "echo"));
  BusClient c(opts(*b, "probe", {MsgType::kLatency}));
  await_connections(*b, 2);
  const auto r = measure_latency(c, 200, 5ms);
  EXPECT_EQ(r.rtt_ms.size(), 200u);
  EXPECT_LT(r.p99_ms, 10.0);
  EXPECT_DOUBLE_EQ(r.one_way_p99_ms(), r.p99_ms / 2);
  EXPECT_EQ(echo.echoed(), 200u);
}

TEST(Latency, PeerDownTimesOut) {
  auto b = make_broker();
  BusClient c(opts(*b, "probe", {MsgType::kLatency}));
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(measure_latency(c, 1, 0ms, 1s), TimeoutError);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 1s);
}

TEST(Latency, Percentile) {
  EXPECT_EQ(percentile({}, 99), 0.0);
  EXPECT_EQ(percentile({3, 1, 2}, 50), 2.0);
  EXPECT_EQ(percentile({3, 1, 2}, 100), 3.0);
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  EXPECT_EQ(percentile(v, 99), 99.0);
}

CtrlPayload await_ctrl(BusClient& c) {
  for (;;) {
    auto m = c.receive(2s);
    if (!m) throw TimeoutError("no CTRL");
    if (m->type == MsgType::kCtrl) {
      auto p = decode_ctrl(*m);
      if (!(m->flags & (kFlagAck | kFlagNack))) continue;
      if (m->flags & kFlagNack) p.mode.reset();
      return p;
    }
  }
}

TEST(BrokerSession, CtrlAckNackAndBroadcast) {
  auto b = make_broker();
  BusClient op(opts(*b, "operator"));
  BusClient watcher(opts(*b, "watcher", {MsgType::kCtrl}));
  auto send = [&](CtrlCode code) {
    op.publish(MsgType::kCtrl, encode_ctrl({code, std::nullopt}));
    return await_ctrl(op);
  };

  auto r = send(CtrlCode::kStart);
  EXPECT_EQ(r.mode, Mode::kActive);
  EXPECT_EQ(await_ctrl(watcher).mode, Mode::kActive);

  r = send(CtrlCode::kStart);
  EXPECT_FALSE(r.mode) << "second start must be rejected";
  EXPECT_EQ(b->mode(), Mode::kActive);

  r = send(CtrlCode::kMarkEpisodeStart);
  EXPECT_EQ(r.code, CtrlCode::kMarkEpisodeStart);
  EXPECT_EQ(await_ctrl(watcher).code, CtrlCode::kMarkEpisodeStart);

  EXPECT_EQ(send(CtrlCode::kPause).mode, Mode::kPaused);
  EXPECT_EQ(send(CtrlCode::kResume).mode, Mode::kInterpolating);
  EXPECT_EQ(send(CtrlCode::kEstop).mode, Mode::kStopped);
  EXPECT_FALSE(send(CtrlCode::kStart).mode);
  EXPECT_EQ(b->mode(), Mode::kStopped);

  BusClient late(opts(*b, "late"));
  EXPECT_EQ(late.handshake()["mode"], "STOPPED");
}

TEST(BrokerSession, EstopLegalFromEveryMode) {
  const std::vector<std::vector<CtrlCode>> paths = {
      {}, {CtrlCode::kStart}, {CtrlCode::kStart, CtrlCode::kPause},
      {CtrlCode::kStart, CtrlCode::kPause, CtrlCode::kResume}};
  for (const auto& path : paths) {
    auto b = make_broker();
    BusClient op(opts(*b, "operator"));
    for (auto code : path) {
      op.publish(MsgType::kCtrl, encode_ctrl({code, std::nullopt}));
      ASSERT_TRUE(await_ctrl(op).mode);
    }
    op.publish(MsgType::kCtrl, encode_ctrl({CtrlCode::kEstop, std::nullopt}));
    EXPECT_EQ(await_ctrl(op).mode, Mode::kStopped);
  }
}

int soak_seconds() {
  const char* env = std::getenv("TW2_SOAK_SECONDS");
  return env ? std::max(1, std::atoi(env)) : 10;
}

TEST(Broker, ThreeTopicSoakZeroDrops) {
  auto b = make_broker();
  BusClient pub(opts(*b, "pub"));
  BusClient sub(opts(*b, "sub", {MsgType::kCmd, MsgType::kState, MsgType::kPose}));
  const int ticks = soak_seconds() * 50;
  const std::vector<std::uint8_t> state(8 + layout().state_dim() * 8, 1);
  const std::vector<std::uint8_t> pose(600, 2);
  std::array<std::uint32_t, 10> last{};
  std::size_t received = 0;
  bool ordered = true;
  std::thread consumer([&] {
    while (received < static_cast<std::size_t>(3 * ticks)) {
      auto m = sub.receive(2s);
      if (!m) break;
      auto& prev = last[static_cast<std::size_t>(m->type)];
      if (m->seq != prev + 1) ordered = false;
      prev = m->seq;
      ++received;
    }
  });
  auto next = std::chrono::steady_clock::now();
  for (int i = 0; i < ticks; ++i) {
    std::this_thread::sleep_until(next);
    next += 20ms;
    pub.publish(MsgType::kPose, pose);
    pub.publish(MsgType::kCmd, cmd_payload(i));
    pub.publish(MsgType::kState, state);
  }
  consumer.join();
  EXPECT_EQ(received, static_cast<std::size_t>(3 * ticks));
  EXPECT_TRUE(ordered);
  EXPECT_EQ(b->stats().dropped, 0u);
  EXPECT_EQ(sub.dropped(), 0u);
}

TEST(Broker, SlowSubscriberOverflowCounted) {
  BrokerConfig cfg;
  cfg.port = 0;
  cfg.queue_limit = 4;
  Broker b(cfg);
  BusClient pub(opts(b, "pub"));
  // A raw subscriber that never reads: the kernel buffers fill, then the queue.
  Socket raw = connect_tcp("127.0.0.1", b.port());
  const std::string hello = R"({"version": 1, "subscribe": ["frame"]})";
  write_message(raw, {MsgType::kHandshake, 0, 1, 1, {hello.begin(), hello.end()}});
  ASSERT_TRUE(read_message(raw, 2000ms));
  const std::vector<std::uint8_t> big(1 << 20, 7);
  for (int i = 0; i < 64 && b.stats().dropped == 0; ++i) {
    pub.publish(MsgType::kFrame, big);
    std::this_thread::sleep_for(5ms);
  }
  EXPECT_GT(b.stats().dropped, 0u);
  EXPECT_TRUE(pub.connected());
}

TEST(Broker, StopDisconnectsClients) {
  auto b = make_broker();
  BusClient c(opts(*b, "a", {MsgType::kCmd}));
  b->stop();
  EXPECT_FALSE(c.receive(1s));
  EXPECT_FALSE(c.connected());
  EXPECT_THROW(c.publish(MsgType::kCmd, cmd_payload(0)), ProtocolError);
}

TEST(Broker, PortFromEnvironment) {
  ::setenv("TW2_BUS_PORT", "9123", 1);
  EXPECT_EQ(default_bus_port(), 9123);
  ::setenv("TW2_BUS_PORT", "notaport", 1);
  EXPECT_THROW(default_bus_port(), ConfigError);
  ::unsetenv("TW2_BUS_PORT");
  EXPECT_EQ(default_bus_port(), kDefaultBusPort);
  EXPECT_EQ(default_bridge_port(), kDefaultBridgePort);
}

}  // namespace
}  // namespace tw2
