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


#include "tw2/websocket.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace tw2::ws {
namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string base64(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t") - b + 1));
}

bool has_token(const std::string& value, std::string_view token) {
  return lower(value).find(token) != std::string::npos;
}

void send_text(const Socket& s, const std::string& text) {
  write_all(s, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Reads a CRLF-terminated head, byte by byte, capped at 16 KiB.
std::vector<std::string> read_head(const Socket& s, std::chrono::milliseconds timeout) {
  std::string head;
  std::uint8_t c = 0;
  while (head.size() < 16384) {
    if (!read_exact(s, std::span(&c, 1), timeout)) throw ProtocolError("HTTP head timed out");
    head.push_back(static_cast<char>(c));
    if (head.ends_with("\r\n\r\n")) {
      std::vector<std::string> lines;
      std::size_t pos = 0;
      for (;;) {
        const auto end = head.find("\r\n", pos);
        if (end == pos) break;
        lines.push_back(head.substr(pos, end - pos));
        pos = end + 2;
      }
      return lines;
    }
  }
  throw ProtocolError("HTTP head too large");
}

std::map<std::string, std::string> parse_headers(const std::vector<std::string>& lines) {
  std::map<std::string, std::string> headers;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto colon = lines[i].find(':');
    if (colon == std::string::npos) throw ProtocolError("malformed header line");
    headers[lower(trim(std::string_view(lines[i]).substr(0, colon)))] =
        trim(std::string_view(lines[i]).substr(colon + 1));
  }
  return headers;
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string joined = std::string(client_key) + std::string(kGuid);
  std::array<std::uint8_t, SHA_DIGEST_LENGTH> digest{};
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest.data());
  return base64(digest);
}

std::vector<std::uint8_t> encode(std::uint8_t opcode, std::span<const std::uint8_t> payload,
                                 std::optional<std::array<std::uint8_t, 4>> mask) {
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<std::uint8_t>(0x80 | (opcode & 0x0F)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<std::uint8_t>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(mask_bit | 126);
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
  } else {
    out.push_back(mask_bit | 127);
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
  }
  if (mask) out.insert(out.end(), mask->begin(), mask->end());
  const std::size_t start = out.size();
  out.insert(out.end(), payload.begin(), payload.end());
  if (mask) {
    for (std::size_t i = 0; i < n; ++i) out[start + i] ^= (*mask)[i % 4];
  }
  return out;
}

std::optional<Frame> read_frame(const Socket& s, std::chrono::milliseconds timeout,
                                bool expect_masked, std::size_t max_payload) {
  std::array<std::uint8_t, 2> head{};
  if (!read_exact(s, head, timeout)) return std::nullopt;
  const auto rest = std::chrono::milliseconds(5000);
  Frame f;
  f.fin = head[0] & 0x80;
  f.opcode = head[0] & 0x0F;
  if (head[0] & 0x70) throw ProtocolError("websocket: reserved bits set");
  const bool masked = head[1] & 0x80;
  if (masked != expect_masked) throw ProtocolError("websocket: wrong masking");
  std::uint64_t n = head[1] & 0x7F;
  if (n >= 126) {
    std::array<std::uint8_t, 8> ext{};
    const std::size_t len = n == 126 ? 2 : 8;
    if (!read_exact(s, std::span(ext).first(len), rest)) throw ProtocolError("websocket: stalled");
    n = 0;
    for (std::size_t i = 0; i < len; ++i) n = (n << 8) | ext[i];
  }
  if (n > max_payload) throw ProtocolError("websocket: frame too large");
  std::array<std::uint8_t, 4> mask{};
  if (masked && !read_exact(s, mask, rest)) throw ProtocolError("websocket: stalled");
  f.payload.resize(static_cast<std::size_t>(n));
  if (n > 0 && !read_exact(s, f.payload, rest)) throw ProtocolError("websocket: stalled");
  if (masked) {
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] ^= mask[i % 4];
  }
  return f;
}

HttpRequest read_request(const Socket& s, std::chrono::milliseconds timeout) {
  const auto lines = read_head(s, timeout);
  if (lines.empty()) throw ProtocolError("empty HTTP request");
  HttpRequest req;
  const auto sp1 = lines[0].find(' ');
  const auto sp2 = lines[0].find(' ', sp1 + 1);
  if (sp1 == std::string::npos || sp2 == std::string::npos) {
    throw ProtocolError("malformed request line");
  }
  req.method = lines[0].substr(0, sp1);
  req.target = lines[0].substr(sp1 + 1, sp2 - sp1 - 1);
  req.headers = parse_headers(lines);
  return req;
}

void accept_upgrade(const Socket& s, const HttpRequest& req) {
  auto header = [&](const char* name) {
    const auto it = req.headers.find(name);
    return it == req.headers.end() ? std::string() : it->second;
  };
  const bool upgrade = req.method == "GET" && has_token(header("upgrade"), "websocket") &&
                       has_token(header("connection"), "upgrade");
  if (!upgrade) {
    send_text(s,
              "HTTP/1.1 426 Upgrade Required\r\nUpgrade: websocket\r\nContent-Length: 0\r\n"
              "Connection: close\r\n\r\n");
    throw ProtocolError("not a websocket upgrade");
  }
  const std::string key = header("sec-websocket-key");
  if (key.empty() || header("sec-websocket-version") != "13") {
    send_text(s,
              "HTTP/1.1 400 Bad Request\r\nSec-WebSocket-Version: 13\r\nContent-Length: 0\r\n"
              "Connection: close\r\n\r\n");
    throw ProtocolError("bad websocket key or version");
  }
  send_text(s, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
               "Connection: Upgrade\r\nSec-WebSocket-Accept: " +
                   accept_key(key) + "\r\n\r\n");
}

void client_upgrade(const Socket& s, const std::string& host, const std::string& path) {
  std::array<std::uint8_t, 16> nonce{};
  std::random_device rd;
  for (auto& b : nonce) b = static_cast<std::uint8_t>(rd());
  const std::string key = base64(nonce);
  send_text(s, "GET " + path + " HTTP/1.1\r\nHost: " + host +
                   "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                   "\r\nSec-WebSocket-Version: 13\r\n\r\n");
  const auto lines = read_head(s, std::chrono::milliseconds(2000));
  if (lines.empty() || lines[0].find(" 101 ") == std::string::npos) {
    throw ProtocolError("websocket upgrade refused: " + (lines.empty() ? "" : lines[0]));
  }
  const auto headers = parse_headers(lines);
  const auto it = headers.find("sec-websocket-accept");
  if (it == headers.end() || it->second != accept_key(key)) {
    throw ProtocolError("websocket accept key mismatch");
  }
}

}  // namespace tw2::ws
