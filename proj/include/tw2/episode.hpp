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


#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tw2/command.hpp"

namespace tw2 {

enum class MarkKind : std::uint8_t {
  kEpisodeStart = 0,
  kEpisodeEnd = 1,
  kFailure = 2,
  kPause = 3,
  kGap = 4,  // a live stream went silent
};

std::string_view mark_name(MarkKind k);
MarkKind parse_mark(std::string_view name);

struct Mark {
  std::int64_t timestamp_ns = 0;
  MarkKind kind = MarkKind::kEpisodeStart;
  bool operator==(const Mark&) const = default;
};

struct EpisodeHeader {
  Layout layout;
  std::optional<NormalizationStats> stats;
  double record_hz = 30.0;
  double cmd_hz = 50.0;
  double state_hz = 50.0;
  std::string model_hash;
  std::int64_t created_at_ns = 0;  // wall clock, informational

  nlohmann::json to_json() const;
  static EpisodeHeader from_json(const nlohmann::json& j);
  bool operator==(const EpisodeHeader&) const = default;
};

struct EpisodeRecord {
  std::int64_t timestamp_ns = 0;
  std::vector<double> command;  // flattened CommandVector
  std::vector<double> state;    // flattened ProprioState
  std::optional<std::size_t> frame;  // index into Episode::frames
  bool operator==(const EpisodeRecord&) const = default;
};

struct Episode {
  EpisodeHeader header;
  std::vector<EpisodeRecord> records;
  std::vector<std::vector<std::uint8_t>> frames;  // JPEG bytes
  std::vector<Mark> marks;

  /// Throws FormatError unless timestamps strictly increase, dimensions
  /// match the layout, frame refs resolve and marks are sorted.
  void validate() const;
  double duration_s() const;
  bool operator==(const Episode&) const = default;
};

/// Content hash used to tie an episode to the robot model it was recorded with.
std::string model_hash(const std::filesystem::path& model_file);

/// File layout (little-endian):
///   "TW2E" u32 version u32 n  header JSON (n bytes)
///   records, fixed stride: i64 t, u64 frame offset (~0 = none),
///                          f64 command[C], f64 state[S]
///   blob: u64 frame count, then per frame u64 length + bytes; a frame
///         offset points at its length field, relative to the blob start
///   marks: u32 count, then per mark i64 t, u8 kind
///   footer: u64 record count, u64 blob offset, u64 marks offset,
///           u64 FNV-1a of every byte before the footer, "TW2F"
/// A file without a valid footer is incomplete and rejected on read.
inline constexpr std::uint32_t kEpisodeVersion = 1;

/// Streams an episode to disk. Frames go to a sidecar until finish().
class EpisodeWriter {
 public:
  EpisodeWriter(const std::filesystem::path& path, const EpisodeHeader& header);
  ~EpisodeWriter();
  EpisodeWriter(const EpisodeWriter&) = delete;
  EpisodeWriter& operator=(const EpisodeWriter&) = delete;

  /// Stores a frame; returns the reference to put in records.
  std::uint64_t add_frame(std::span<const std::uint8_t> jpeg);
  void append(std::int64_t timestamp_ns, std::span<const double> command,
              std::span<const double> state, std::optional<std::uint64_t> frame_ref);
  void add_mark(const Mark& m);

  /// Writes blob, marks and footer. Without this the file stays invalid.
  void finish();
  std::size_t records() const { return records_; }
  bool finished() const { return finished_; }
  const std::filesystem::path& path() const { return path_; }
  const EpisodeHeader& header() const { return header_; }

 private:
  void write(std::span<const std::uint8_t> bytes);

  std::filesystem::path path_;
  std::filesystem::path blob_path_;
  std::ofstream out_;
  std::ofstream blob_;
  EpisodeHeader header_;
  std::uint64_t hash_;
  std::uint64_t offset_ = 0;
  std::uint64_t blob_size_ = 8;  // the frame count field
  std::uint64_t frame_count_ = 0;
  std::size_t records_ = 0;
  std::int64_t last_ts_ = 0;
  std::vector<Mark> marks_;
  bool finished_ = false;
};

void write_episode(const std::filesystem::path& path, const Episode& episode);
/// Throws FormatError on a missing footer, bad checksum or invariant breach.
Episode read_episode(const std::filesystem::path& path);

}  // namespace tw2
