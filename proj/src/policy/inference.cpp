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


#include "tw2/inference.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "tw2/binary_io.hpp"

namespace tw2 {

Message encode_request(const InferenceRequest& r, std::int64_t timestamp_ns) {
  const std::size_t dim = r.history.empty() ? 0 : r.history.front().size();
  Message m{MsgType::kInferReq, 0, r.id, static_cast<std::uint64_t>(timestamp_ns), {}};
  ByteWriter w(m.payload);
  w.put<std::uint32_t>(kInferenceApiVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.history.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.image.size()));
  w.put_bytes(r.image);
  for (const auto& row : r.history) {
    if (row.size() != dim) throw DimensionError("history rows differ in length");
    w.put_doubles(row);
  }
  return m;
}

InferenceRequest decode_request(const Message& m) {
  if (m.type != MsgType::kInferReq) throw ProtocolError("expected INFER_REQ");
  ByteReader r(m.payload);
  if (r.get<std::uint32_t>() != kInferenceApiVersion) {
    throw ProtocolError("unsupported inference api version");
  }
  const auto rows = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  const auto image_len = r.get<std::uint32_t>();
  InferenceRequest req;
  req.id = m.seq;
  const auto image = r.get_bytes(image_len);
  req.image.assign(image.begin(), image.end());
  for (std::uint32_t i = 0; i < rows; ++i) req.history.push_back(r.get_doubles(dim));
  if (r.remaining() != 0) throw ProtocolError("trailing bytes in INFER_REQ");
  return req;
}

Message encode_response(const InferenceResponse& r, std::int64_t timestamp_ns) {
  const std::size_t dim = r.steps.empty() ? 0 : r.steps.front().size();
  Message m{MsgType::kInferResp, 0, r.id, static_cast<std::uint64_t>(timestamp_ns), {}};
  ByteWriter w(m.payload);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(r.steps.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  for (const auto& row : r.steps) {
    if (row.size() != dim) throw DimensionError("chunk rows differ in length");
    w.put_doubles(row);
  }
  return m;
}

InferenceResponse decode_response(const Message& m) {
  if (m.type != MsgType::kInferResp) throw ProtocolError("expected INFER_RESP");
  if (m.flags & kFlagError) {
    throw ProtocolError("endpoint error: " + std::string(m.payload.begin(), m.payload.end()));
  }
  ByteReader r(m.payload);
  const auto steps = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  if (r.remaining() != static_cast<std::size_t>(steps) * dim * sizeof(double)) {
    throw ProtocolError("INFER_RESP length does not match its shape");
  }
  InferenceResponse resp;
  resp.id = m.seq;
  for (std::uint32_t i = 0; i < steps; ++i) resp.steps.push_back(r.get_doubles(dim));
  return resp;
}

// ---------------------------------------------------------------- client --

InferenceClient::InferenceClient(std::string host, std::uint16_t port)
    : host_(std::move(host)), port_(port) {}

InferenceResponse InferenceClient::call(std::span<const std::uint8_t> image,
                                        const std::vector<std::vector<double>>& history,
                                        std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  if (!sock_.valid()) sock_ = connect_tcp(host_, port_, timeout);
  InferenceRequest req{next_id_++, {image.begin(), image.end()}, history};
  try {
    write_message(sock_, encode_request(req, now_ns()));
    for (;;) {
      const auto left = std::chrono::ceil<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("inference timed out");
      auto m = read_message(sock_, left);
      if (!m) throw TimeoutError("inference timed out");
      if (m->type == MsgType::kInferResp && m->seq < req.id) continue;  // stale reply
      InferenceResponse resp = decode_response(*m);
      if (resp.id != req.id) throw ProtocolError("reply for an unknown request");
      if (resp.steps.size() != kChunkSteps) {
        throw ProtocolError("chunk has " + std::to_string(resp.steps.size()) + " steps, expected " +
                            std::to_string(kChunkSteps));
      }
      const std::size_t dim = history.empty() ? 0 : history.front().size();
      for (const auto& row : resp.steps) {
        if (row.size() != dim) throw ProtocolError("chunk dimension does not match history");
        for (double x : row) {
          if (!std::isfinite(x)) throw ProtocolError("chunk has non-finite entries");
        }
      }
      return resp;
    }
  } catch (const ProtocolError&) {
    // Stream state is unknown after a framing error; reconnect next call.
    sock_.close();
    throw;
  }
}

// ---------------------------------------------------------------- server --

EchoPolicyServer::EchoPolicyServer(EchoPolicyOptions options)
    : options_(std::move(options)), listener_(options_.host, options_.port) {
  acceptor_ = std::thread([this] {
    while (running_) {
      std::optional<Socket> s;
      try {
        s = listener_.accept(std::chrono::milliseconds(100));
      } catch (const std::exception&) {
        break;
      }
      if (!s) continue;
      auto sock = std::make_shared<Socket>(std::move(*s));
      std::lock_guard lock(mu_);
      socks_.push_back(sock);
      workers_.emplace_back([this, sock] { serve(sock); });
    }
  });
}

EchoPolicyServer::~EchoPolicyServer() { stop(); }

void EchoPolicyServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::lock_guard lock(mu_);
  for (auto& s : socks_) s->shutdown();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

void EchoPolicyServer::serve(const std::shared_ptr<Socket>& sock) {
  const Socket& s = *sock;
  try {
    while (running_) {
      auto m = read_message(s, std::chrono::milliseconds(100));
      if (!m) continue;
      InferenceResponse resp;
      try {
        const auto req = decode_request(*m);
        resp.id = req.id;
        if (options_.fixed_chunk) {
          resp.steps = *options_.fixed_chunk;
        } else if (!req.history.empty()) {
          resp.steps.assign(options_.steps, req.history.back());
        }
      } catch (const ProtocolError& e) {
        const std::string what = e.what();
        write_message(s, {MsgType::kInferResp, kFlagError, m->seq,
                          static_cast<std::uint64_t>(now_ns()), {what.begin(), what.end()}});
        continue;
      }
      if (options_.silent) continue;
      std::this_thread::sleep_for(options_.latency);
      write_message(s, encode_response(resp, now_ns()));
      ++served_;
    }
  } catch (const ProtocolError&) {
    // Peer went away.
  }
}

}  // namespace tw2
