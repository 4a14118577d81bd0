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


#include "tw2/episode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "tw2/binary_io.hpp"

namespace tw2 {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'T', 'W', '2', 'E'};
constexpr std::array<std::uint8_t, 4> kFooterMagic{'T', 'W', '2', 'F'};
constexpr std::size_t kFooterSize = 4 * 8 + 4;
constexpr std::uint64_t kNoFrame = std::numeric_limits<std::uint64_t>::max();

std::size_t record_stride(const Layout& l) {
  return 16 + 8 * (l.command_dim() + l.state_dim());
}

}  // namespace

std::string_view mark_name(MarkKind k) {
  switch (k) {
    case MarkKind::kEpisodeStart: return "episode_start";
    case MarkKind::kEpisodeEnd: return "episode_end";
    case MarkKind::kFailure: return "failure";
    case MarkKind::kPause: return "pause";
    case MarkKind::kGap: return "gap";
  }
  return "?";
}

MarkKind parse_mark(std::string_view name) {
  for (std::uint8_t i = 0; i <= 4; ++i) {
    if (mark_name(static_cast<MarkKind>(i)) == name) return static_cast<MarkKind>(i);
  }
  throw std::invalid_argument("unknown mark kind '" + std::string(name) + "'");
}

nlohmann::json EpisodeHeader::to_json() const {
  nlohmann::json j{{"format", "tw2e"},
                   {"version", kEpisodeVersion},
                   {"layout", layout.to_json()},
                   {"rates", {{"record_hz", record_hz}, {"cmd_hz", cmd_hz}, {"state_hz", state_hz}}},
                   {"model_hash", model_hash},
                   {"created_at_ns", created_at_ns},
                   {"command_dim", layout.command_dim()},
                   {"state_dim", layout.state_dim()},
                   {"record_stride", record_stride(layout)}};
  j["stats"] = stats ? stats->to_json() : nlohmann::json();
  return j;
}

EpisodeHeader EpisodeHeader::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "tw2e") throw FormatError("not an episode header");
    if (j.at("version") != kEpisodeVersion) {
      throw FormatError("unsupported episode version " + j.at("version").dump());
    }
    EpisodeHeader h;
    h.layout = Layout::from_json(j.at("layout"));
    const auto& r = j.at("rates");
    h.record_hz = r.at("record_hz");
    h.cmd_hz = r.at("cmd_hz");
    h.state_hz = r.at("state_hz");
    h.model_hash = j.at("model_hash");
    h.created_at_ns = j.at("created_at_ns");
    if (!j.at("stats").is_null()) h.stats = NormalizationStats::from_json(j.at("stats"));
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad episode header: ") + e.what());
  } catch (const ProtocolError& e) {
    throw FormatError(std::string("bad episode header: ") + e.what());
  }
}

void Episode::validate() const {
  const std::size_t c = header.layout.command_dim();
  const std::size_t s = header.layout.state_dim();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.timestamp_ns <= records[i - 1].timestamp_ns) {
      throw FormatError("record timestamps must strictly increase (record " + std::to_string(i) +
                        ")");
    }
    if (r.command.size() != c || r.state.size() != s) {
      throw FormatError("record " + std::to_string(i) + " does not match the layout");
    }
    if (r.frame && *r.frame >= frames.size()) {
      throw FormatError("record " + std::to_string(i) + " references a missing frame");
    }
  }
  if (!std::is_sorted(marks.begin(), marks.end(),
                      [](const Mark& a, const Mark& b) { return a.timestamp_ns < b.timestamp_ns; })) {
    throw FormatError("marks are not sorted");
  }
  if (header.stats && header.stats->size() != c) {
    throw FormatError("normalization stats do not match the command layout");
  }
}

double Episode::duration_s() const {
  if (records.size() < 2) return 0.0;
  return static_cast<double>(records.back().timestamp_ns - records.front().timestamp_ns) * 1e-9;
}

std::string model_hash(const std::filesystem::path& model_file) {
  std::ifstream in(model_file, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + model_file.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

// ---------------------------------------------------------------- writer --

EpisodeWriter::EpisodeWriter(const std::filesystem::path& path, const EpisodeHeader& header)
    : path_(path), header_(header), hash_(fnv1a64({})) {
  blob_path_ = path_;
  blob_path_ += ".blob.tmp";
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot create " + path_.string());
  blob_.open(blob_path_, std::ios::binary | std::ios::trunc);
  if (!blob_) throw std::runtime_error("cannot create " + blob_path_.string());

  const std::string json = header.to_json().dump();
  std::vector<std::uint8_t> head;
  ByteWriter w(head);
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kEpisodeVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(json.size()));
  w.put_string(json);
  write(head);
}

EpisodeWriter::~EpisodeWriter() {
  blob_.close();
  std::error_code ec;
  std::filesystem::remove(blob_path_, ec);
}

void EpisodeWriter::write(std::span<const std::uint8_t> bytes) {
  out_.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw std::runtime_error("write failed on " + path_.string());
  hash_ = fnv1a64(bytes, hash_);
  offset_ += bytes.size();
}

std::uint64_t EpisodeWriter::add_frame(std::span<const std::uint8_t> jpeg) {
  if (finished_) throw std::logic_error("episode already finished");
  const std::uint64_t ref = blob_size_;
  const std::uint64_t n = jpeg.size();
  blob_.write(reinterpret_cast<const char*>(&n), sizeof(n));
  blob_.write(reinterpret_cast<const char*>(jpeg.data()), static_cast<std::streamsize>(n));
  if (!blob_) throw std::runtime_error("write failed on " + blob_path_.string());
  blob_size_ += 8 + n;
  ++frame_count_;
  return ref;
}

void EpisodeWriter::append(std::int64_t timestamp_ns, std::span<const double> command,
                           std::span<const double> state,
                           std::optional<std::uint64_t> frame_ref) {
  if (finished_) throw std::logic_error("episode already finished");
  if (command.size() != header_.layout.command_dim() ||
      state.size() != header_.layout.state_dim()) {
    throw DimensionError("record does not match the episode layout");
  }
  if (records_ > 0 && timestamp_ns <= last_ts_) {
    throw ValidationError("record timestamps must strictly increase");
  }
  if (frame_ref && *frame_ref >= blob_size_) throw ValidationError("unknown frame reference");
  std::vector<std::uint8_t> rec;
  rec.reserve(record_stride(header_.layout));
  ByteWriter w(rec);
  w.put<std::int64_t>(timestamp_ns);
  w.put<std::uint64_t>(frame_ref.value_or(kNoFrame));
  w.put_doubles(command);
  w.put_doubles(state);
  write(rec);
  last_ts_ = timestamp_ns;
  ++records_;
}

void EpisodeWriter::add_mark(const Mark& m) {
  if (finished_) throw std::logic_error("episode already finished");
  marks_.insert(std::upper_bound(marks_.begin(), marks_.end(), m,
                                 [](const Mark& a, const Mark& b) {
                                   return a.timestamp_ns < b.timestamp_ns;
                                 }),
                m);
}

void EpisodeWriter::finish() {
  if (finished_) return;
  const std::uint64_t blob_offset = offset_;
  std::vector<std::uint8_t> buf;
  ByteWriter(buf).put<std::uint64_t>(frame_count_);
  write(buf);

  blob_.close();
  std::ifstream blob(blob_path_, std::ios::binary);
  std::vector<std::uint8_t> chunk(1 << 20);
  while (blob) {
    blob.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(chunk.size()));
    const auto n = static_cast<std::size_t>(blob.gcount());
    if (n == 0) break;
    write(std::span(chunk).first(n));
  }

  const std::uint64_t marks_offset = offset_;
  buf.clear();
  ByteWriter w(buf);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(marks_.size()));
  for (const auto& m : marks_) {
    w.put<std::int64_t>(m.timestamp_ns);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
  }
  write(buf);

  buf.clear();
  w.put<std::uint64_t>(records_);
  w.put<std::uint64_t>(blob_offset);
  w.put<std::uint64_t>(marks_offset);
  w.put<std::uint64_t>(hash_);
  w.put_bytes(kFooterMagic);
  write(buf);
  out_.flush();
  if (!out_) throw std::runtime_error("write failed on " + path_.string());
  out_.close();
  finished_ = true;
}

void write_episode(const std::filesystem::path& path, const Episode& episode) {
  episode.validate();
  EpisodeWriter w(path, episode.header);
  std::vector<std::uint64_t> refs;
  refs.reserve(episode.frames.size());
  for (const auto& f : episode.frames) refs.push_back(w.add_frame(f));
  for (const auto& r : episode.records) {
    w.append(r.timestamp_ns, r.command, r.state,
             r.frame ? std::optional(refs[*r.frame]) : std::nullopt);
  }
  for (const auto& m : episode.marks) w.add_mark(m);
  w.finish();
}

// ---------------------------------------------------------------- reader --

Episode read_episode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 + kFooterSize || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(where + "not an episode file");
  }
  const auto footer = std::span(bytes).last(kFooterSize);
  if (!std::equal(kFooterMagic.begin(), kFooterMagic.end(), footer.end() - 4)) {
    throw FormatError(where + "missing footer (incomplete recording)");
  }
  try {
    ByteReader f(footer);
    const auto count = f.get<std::uint64_t>();
    const auto blob_offset = f.get<std::uint64_t>();
    const auto marks_offset = f.get<std::uint64_t>();
    const auto checksum = f.get<std::uint64_t>();
    const std::size_t body_end = bytes.size() - kFooterSize;
    if (fnv1a64(std::span(bytes).first(body_end)) != checksum) {
      throw FormatError(where + "checksum mismatch");
    }

    ByteReader r(bytes);
    r.get_bytes(4);
    if (r.get<std::uint32_t>() != kEpisodeVersion) throw FormatError(where + "unsupported version");
    const auto json_len = r.get<std::uint32_t>();
    Episode ep;
    try {
      ep.header = EpisodeHeader::from_json(nlohmann::json::parse(r.get_string(json_len)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + "header is not JSON: " + e.what());
    }
    const std::size_t records_start = r.position();
    const std::size_t stride = record_stride(ep.header.layout);
    if (blob_offset < records_start || marks_offset < blob_offset || marks_offset > body_end ||
        (blob_offset - records_start) != count * stride) {
      throw FormatError(where + "section offsets are inconsistent");
    }

    ByteReader blob{std::span(bytes).subspan(blob_offset, marks_offset - blob_offset)};
    const auto frame_count = blob.get<std::uint64_t>();
    std::map<std::uint64_t, std::size_t> by_ref;
    for (std::uint64_t i = 0; i < frame_count; ++i) {
      const std::uint64_t ref = blob.position();
      const auto n = blob.get<std::uint64_t>();
      const auto data = blob.get_bytes(n);
      by_ref.emplace(ref, ep.frames.size());
      ep.frames.emplace_back(data.begin(), data.end());
    }
    if (blob.remaining() != 0) throw FormatError(where + "trailing bytes in image blob");

    const std::size_t c = ep.header.layout.command_dim();
    const std::size_t s = ep.header.layout.state_dim();
    ep.records.resize(count);
    for (auto& rec : ep.records) {
      rec.timestamp_ns = r.get<std::int64_t>();
      const auto ref = r.get<std::uint64_t>();
      if (ref != kNoFrame) {
        const auto it = by_ref.find(ref);
        if (it == by_ref.end()) throw FormatError(where + "dangling frame reference");
        rec.frame = it->second;
      }
      rec.command = r.get_doubles(c);
      rec.state = r.get_doubles(s);
    }

    ByteReader m{std::span(bytes).subspan(marks_offset, body_end - marks_offset)};
    const auto mark_count = m.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < mark_count; ++i) {
      Mark mk;
      mk.timestamp_ns = m.get<std::int64_t>();
      const auto kind = m.get<std::uint8_t>();
      if (kind > static_cast<std::uint8_t>(MarkKind::kGap)) throw FormatError(where + "bad mark");
      mk.kind = static_cast<MarkKind>(kind);
      ep.marks.push_back(mk);
    }
    if (m.remaining() != 0) throw FormatError(where + "trailing bytes after marks");
    ep.validate();
    return ep;
  } catch (const ProtocolError& e) {
    throw FormatError(where + e.what());
  }
}

}  // namespace tw2
