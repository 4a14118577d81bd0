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

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tw2/bus.hpp"
#include "tw2/episode.hpp"

namespace tw2 {

struct RecorderOptions {
  double record_hz = 30.0;
  double gap_s = 0.5;  // a stream silent this long is marked and not sampled
};

/// Sampling logic of the recorder, independent of sockets and clocks: keeps
/// the latest CMD, STATE and FRAME and writes one record per tick.
class RecorderCore {
 public:
  RecorderCore(EpisodeWriter& writer, RecorderOptions options = {});

  /// Feeds one bus message received at `rx_ns`.
  void on_message(const Message& m, std::int64_t rx_ns);
  /// Samples the latest messages; returns true when a record was written.
  bool tick(std::int64_t now_ns);

  std::size_t records() const { return writer_.records(); }
  std::size_t gaps() const { return gaps_; }

 private:
  EpisodeWriter& writer_;
  RecorderOptions options_;
  std::size_t command_dim_;
  std::size_t state_dim_;

  std::optional<std::vector<double>> cmd_;
  std::optional<std::vector<double>> state_;
  std::int64_t cmd_rx_ = 0;
  std::int64_t state_rx_ = 0;
  std::optional<std::vector<std::uint8_t>> frame_;
  std::int64_t frame_rx_ = 0;
  std::optional<std::uint64_t> frame_ref_;
  bool in_gap_ = false;
  std::size_t gaps_ = 0;
  std::int64_t last_tick_ = 0;
};

/// Live recorder: subscribes to CMD, STATE, FRAME and CTRL and samples at
/// the record rate on its own thread until stop().
class Recorder {
 public:
  Recorder(ClientOptions bus, const std::filesystem::path& path, EpisodeHeader header,
           RecorderOptions options = {});
  ~Recorder();
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  /// Stops sampling and writes the footer. Returns the record count.
  std::size_t stop();
  std::size_t records() const;

 private:
  void run();

  std::unique_ptr<BusClient> bus_;
  std::unique_ptr<EpisodeWriter> writer_;
  std::unique_ptr<RecorderCore> core_;
  RecorderOptions options_;
  mutable std::mutex mu_;
  std::atomic<bool> running_{true};
  std::thread thread_;
};

struct FilterReport {
  std::size_t input_records = 0;
  std::size_t output_records = 0;
  std::size_t idle_removed = 0;
  std::size_t dropped_records = 0;  // outside any kept span
  std::size_t episodes_kept = 0;
  std::size_t episodes_dropped = 0;
  std::vector<std::string> reasons;

  nlohmann::json to_json() const;
};

struct SegmentResult {
  std::vector<Episode> episodes;
  FilterReport report;
};

/// Splits on episode-start/end marks. A span is inclusive of the first record
/// at or after its start mark and the last record at or before its end mark.
/// A failure mark drops the span it falls in, or the span that closed most
/// recently when it falls between spans. A dangling start runs to the end of
/// the file. Without start/end marks the whole file is one span.
SegmentResult segment(const Episode& episode);

/// Compresses every maximal run of consecutive records whose command changes
/// by less than `eps` (infinity norm, normalized when the header has stats)
/// and which lasts longer than `min_duration_s` to its first and last record.
std::pair<Episode, FilterReport> filter_idle(const Episode& episode, double eps = 1e-3,
                                             double min_duration_s = 2.0);

struct ReplayReport {
  std::size_t published = 0;
  double wall_s = 0.0;
};

/// Publishes the recorded commands as CMD at the recorded spacing divided by
/// `speed`, stamped with the current time. `cancel` may stop it early.
ReplayReport replay(const Episode& episode, BusClient& bus, double speed,
                    const std::atomic<bool>* cancel = nullptr);

struct EpisodeStats {
  std::size_t records = 0;
  double duration_s = 0.0;
  NormalizationStats command;
  NormalizationStats state;
  nlohmann::json to_json(const Layout& layout) const;
};

EpisodeStats episode_stats(std::span<const Episode> episodes);

/// Copy of `episode` restricted to records [first, last], keeping only the
/// frames and marks inside that range.
Episode slice(const Episode& episode, std::size_t first, std::size_t last);

}  // namespace tw2
