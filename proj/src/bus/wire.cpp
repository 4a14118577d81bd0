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


#include "tw2/wire.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "tw2/binary_io.hpp"

namespace tw2 {
namespace {

constexpr std::array<std::string_view, 10> kNames{"",      "pose",  "cmd",       "state",
                                                   "frame", "ctrl",  "handshake", "latency",
                                                   "infer_req", "infer_resp"};

}  // namespace

bool is_valid_type(std::uint8_t t) { return t >= 1 && t <= 9; }

std::string_view type_name(MsgType t) { return kNames[static_cast<std::size_t>(t)]; }

MsgType parse_type(std::string_view name) {
  for (std::uint8_t t = 1; t <= 9; ++t) {
    if (kNames[t] == name) return static_cast<MsgType>(t);
  }
  throw std::invalid_argument("unknown topic '" + std::string(name) + "'");
}

std::array<std::uint8_t, kHeaderSize> encode_header(const Header& h) {
  if (h.payload_len > kMaxPayload) throw ProtocolError("payload exceeds 4 MiB");
  std::vector<std::uint8_t> buf;
  buf.reserve(kHeaderSize);
  ByteWriter w(buf);
  w.put_bytes(kWireMagic);
  w.put<std::uint8_t>(kWireVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(h.type));
  w.put<std::uint8_t>(h.flags);
  w.put<std::uint8_t>(0);
  w.put<std::uint32_t>(h.seq);
  w.put<std::uint64_t>(h.timestamp_ns);
  w.put<std::uint32_t>(h.payload_len);
  std::array<std::uint8_t, kHeaderSize> out;
  std::copy(buf.begin(), buf.end(), out.begin());
  return out;
}

Header decode_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes.first(std::min(bytes.size(), kHeaderSize)));
  const auto magic = r.get_bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kWireMagic.begin())) {
    throw ProtocolError("bad magic");
  }
  const auto version = r.get<std::uint8_t>();
  if (version != kWireVersion) {
    throw ProtocolError("unsupported wire version " + std::to_string(version));
  }
  const auto type = r.get<std::uint8_t>();
  if (!is_valid_type(type)) throw ProtocolError("unknown message type " + std::to_string(type));
  Header h;
  h.type = static_cast<MsgType>(type);
  h.flags = r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  h.seq = r.get<std::uint32_t>();
  h.timestamp_ns = r.get<std::uint64_t>();
  h.payload_len = r.get<std::uint32_t>();
  if (h.payload_len > kMaxPayload) throw ProtocolError("payload exceeds 4 MiB");
  return h;
}

std::vector<std::uint8_t> encode(const Message& m) {
  if (m.payload.size() > kMaxPayload) throw ProtocolError("payload exceeds 4 MiB");
  const auto header = encode_header({m.type, m.flags, m.seq, m.timestamp_ns,
                                     static_cast<std::uint32_t>(m.payload.size())});
  std::vector<std::uint8_t> out(kHeaderSize + m.payload.size());
  std::copy(header.begin(), header.end(), out.begin());
  if (!m.payload.empty()) std::memcpy(out.data() + kHeaderSize, m.payload.data(), m.payload.size());
  return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
  const Header h = decode_header(bytes);
  if (bytes.size() != kHeaderSize + h.payload_len) {
    throw ProtocolError("frame length does not match header");
  }
  Message m{h.type, h.flags, h.seq, h.timestamp_ns, {}};
  m.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return m;
}

}  // namespace tw2
