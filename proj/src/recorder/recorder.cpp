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


#include "tw2/recorder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <spdlog/spdlog.h>

#include "tw2/payloads.hpp"

namespace tw2 {
namespace {

std::optional<MarkKind> mark_for(CtrlCode code) {
  switch (code) {
    case CtrlCode::kMarkEpisodeStart: return MarkKind::kEpisodeStart;
    case CtrlCode::kMarkEpisodeEnd: return MarkKind::kEpisodeEnd;
    case CtrlCode::kMarkFailure: return MarkKind::kFailure;
    case CtrlCode::kPause: return MarkKind::kPause;
    default: return std::nullopt;
  }
}

// Records at `indices` (ascending) with frames compacted; no marks.
Episode subset(const Episode& ep, const std::vector<std::size_t>& indices) {
  Episode out;
  out.header = ep.header;
  out.records.reserve(indices.size());
  std::map<std::size_t, std::size_t> remap;
  for (std::size_t i : indices) {
    EpisodeRecord r = ep.records[i];
    if (r.frame) {
      auto [it, fresh] = remap.emplace(*r.frame, out.frames.size());
      if (fresh) out.frames.push_back(ep.frames[*r.frame]);
      r.frame = it->second;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

std::int64_t period_ns(double hz) { return static_cast<std::int64_t>(std::llround(1e9 / hz)); }

}  // namespace

// ---------------------------------------------------------------- core --

RecorderCore::RecorderCore(EpisodeWriter& writer, RecorderOptions options)
    : writer_(writer),
      options_(options),
      command_dim_(writer.header().layout.command_dim()),
      state_dim_(writer.header().layout.state_dim()) {
  if (!(options_.record_hz > 0.0) || !(options_.gap_s > 0.0)) {
    throw ConfigError("record rate and gap threshold must be positive");
  }
}

void RecorderCore::on_message(const Message& m, std::int64_t rx_ns) {
  switch (m.type) {
    case MsgType::kCmd: {
      auto v = decode_doubles(m.payload);
      if (v.size() != command_dim_) throw ProtocolError("CMD payload does not match layout");
      cmd_ = std::move(v);
      cmd_rx_ = rx_ns;
      break;
    }
    case MsgType::kState: {
      if (m.payload.size() != 8 + 8 * state_dim_) {
        throw ProtocolError("STATE payload does not match layout");
      }
      state_ = decode_doubles(std::span(m.payload).subspan(8));
      state_rx_ = rx_ns;
      break;
    }
    case MsgType::kFrame:
      frame_ = m.payload;
      frame_rx_ = rx_ns;
      frame_ref_.reset();
      break;
    case MsgType::kCtrl: {
      if (!(m.flags & kFlagAck)) break;
      if (const auto kind = mark_for(decode_ctrl(m).code)) {
        writer_.add_mark({static_cast<std::int64_t>(m.timestamp_ns), *kind});
      }
      break;
    }
    default:
      break;
  }
}

bool RecorderCore::tick(std::int64_t now_ns) {
  if (!cmd_ || !state_) return false;
  const auto gap = static_cast<std::int64_t>(options_.gap_s * 1e9);
  const bool stale = now_ns - cmd_rx_ > gap || now_ns - state_rx_ > gap;
  if (stale) {
    if (!in_gap_) {
      in_gap_ = true;
      ++gaps_;
      writer_.add_mark({now_ns, MarkKind::kGap});
      spdlog::warn("recorder: stream gap over {:.2f} s ({} silent)", options_.gap_s,
                   now_ns - cmd_rx_ > gap ? "CMD" : "STATE");
    }
    return false;
  }
  in_gap_ = false;
  if (writer_.records() > 0 && now_ns <= last_tick_) return false;

  std::optional<std::uint64_t> ref;
  if (frame_ && now_ns - frame_rx_ <= gap) {
    if (!frame_ref_) frame_ref_ = writer_.add_frame(*frame_);
    ref = frame_ref_;
  }
  writer_.append(now_ns, *cmd_, *state_, ref);
  last_tick_ = now_ns;
  return true;
}

// ---------------------------------------------------------------- live --

Recorder::Recorder(ClientOptions bus, const std::filesystem::path& path, EpisodeHeader header,
                   RecorderOptions options)
    : options_(options) {
  bus.subscribe = {MsgType::kCmd, MsgType::kState, MsgType::kFrame, MsgType::kCtrl};
  if (bus.layout.is_null()) bus.layout = header.layout.to_json();
  bus_ = std::make_unique<BusClient>(std::move(bus));
  header.record_hz = options.record_hz;
  writer_ = std::make_unique<EpisodeWriter>(path, header);
  core_ = std::make_unique<RecorderCore>(*writer_, options);
  thread_ = std::thread([this] { run(); });
}

Recorder::~Recorder() {
  try {
    stop();
  } catch (const std::exception& e) {
    spdlog::error("recorder: {}", e.what());
  }
}

void Recorder::run() {
  const auto period = std::chrono::nanoseconds(period_ns(options_.record_hz));
  auto next = std::chrono::steady_clock::now() + period;
  while (running_) {
    const auto left = std::chrono::ceil<std::chrono::milliseconds>(
        next - std::chrono::steady_clock::now());
    auto m = bus_->receive(std::max(left, std::chrono::milliseconds(0)));
    std::lock_guard lock(mu_);
    if (m) {
      try {
        core_->on_message(*m, now_ns());
      } catch (const ProtocolError& e) {
        spdlog::warn("recorder: skipping {}: {}", type_name(m->type), e.what());
      }
    } else if (!bus_->connected()) {
      spdlog::error("recorder: bus lost: {}", bus_->error());
      break;
    }
    if (std::chrono::steady_clock::now() >= next) {
      core_->tick(now_ns());
      next += period;
    }
  }
}

std::size_t Recorder::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
  std::lock_guard lock(mu_);
  if (!writer_->finished()) {
    bus_->close();
    writer_->finish();
  }
  return writer_->records();
}

std::size_t Recorder::records() const {
  std::lock_guard lock(mu_);
  return writer_->records();
}

// ---------------------------------------------------------------- ops --

nlohmann::json FilterReport::to_json() const {
  return {{"input_records", input_records},       {"output_records", output_records},
          {"idle_removed", idle_removed},         {"dropped_records", dropped_records},
          {"episodes_kept", episodes_kept},       {"episodes_dropped", episodes_dropped},
          {"reasons", reasons}};
}

Episode slice(const Episode& episode, std::size_t first, std::size_t last) {
  if (first > last || last >= episode.records.size()) {
    throw std::out_of_range("slice outside the episode");
  }
  std::vector<std::size_t> idx(last - first + 1);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = first + i;
  Episode out = subset(episode, idx);
  const auto t0 = episode.records[first].timestamp_ns;
  const auto t1 = episode.records[last].timestamp_ns;
  for (const auto& m : episode.marks) {
    if (m.timestamp_ns >= t0 && m.timestamp_ns <= t1) out.marks.push_back(m);
  }
  return out;
}

SegmentResult segment(const Episode& episode) {
  struct Span {
    std::int64_t start;
    std::int64_t end;
    bool failed = false;
  };
  constexpr auto kOpenEnd = std::numeric_limits<std::int64_t>::max();
  SegmentResult result;
  auto& rep = result.report;
  rep.input_records = episode.records.size();

  std::vector<Span> spans;
  bool open = false;
  bool any_bounds = false;
  for (const auto& m : episode.marks) {
    switch (m.kind) {
      case MarkKind::kEpisodeStart:
        any_bounds = true;
        if (open) {
          rep.reasons.push_back("start mark at " + std::to_string(m.timestamp_ns) +
                                " while a span is open: previous span closed there");
          spans.back().end = m.timestamp_ns - 1;
        }
        spans.push_back({m.timestamp_ns, kOpenEnd});
        open = true;
        break;
      case MarkKind::kEpisodeEnd:
        any_bounds = true;
        if (!open) {
          rep.reasons.push_back("end mark at " + std::to_string(m.timestamp_ns) +
                                " without a start: ignored");
          break;
        }
        spans.back().end = m.timestamp_ns;
        open = false;
        break;
      case MarkKind::kFailure:
        if (!spans.empty()) spans.back().failed = true;
        break;
      default:
        break;
    }
  }
  if (open) {
    rep.reasons.push_back("dangling start mark: span runs to end of file");
  }
  if (!any_bounds) {
    const bool failed = std::any_of(episode.marks.begin(), episode.marks.end(),
                                    [](const Mark& m) { return m.kind == MarkKind::kFailure; });
    spans = {{std::numeric_limits<std::int64_t>::min(), kOpenEnd, failed}};
  }

  const auto& recs = episode.records;
  auto ts_less = [](const EpisodeRecord& r, std::int64_t t) { return r.timestamp_ns < t; };
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    const std::size_t first =
        std::lower_bound(recs.begin(), recs.end(), s.start, ts_less) - recs.begin();
    const std::size_t past = std::upper_bound(recs.begin(), recs.end(), s.end,
                                              [](std::int64_t t, const EpisodeRecord& r) {
                                                return t < r.timestamp_ns;
                                              }) -
                             recs.begin();
    const std::string label = "span " + std::to_string(k + 1);
    if (first >= past) {
      ++rep.episodes_dropped;
      rep.reasons.push_back(label + ": no records");
      continue;
    }
    if (s.failed) {
      ++rep.episodes_dropped;
      rep.reasons.push_back(label + ": failure mark, " + std::to_string(past - first) +
                            " records dropped");
      continue;
    }
    result.episodes.push_back(slice(episode, first, past - 1));
    ++rep.episodes_kept;
    rep.output_records += past - first;
  }
  rep.dropped_records = rep.input_records - rep.output_records;
  return result;
}

std::pair<Episode, FilterReport> filter_idle(const Episode& episode, double eps,
                                             double min_duration_s) {
  if (!(eps >= 0.0) || !(min_duration_s > 0.0)) {
    throw std::invalid_argument("filter_idle needs eps >= 0 and a positive duration");
  }
  const auto& recs = episode.records;
  const std::size_t n = recs.size();
  std::vector<std::vector<double>> cmd(n);
  for (std::size_t i = 0; i < n; ++i) {
    cmd[i] = episode.header.stats ? normalize(recs[i].command, *episode.header.stats)
                                  : recs[i].command;
  }
  auto idle_pair = [&](std::size_t i) {
    double d = 0.0;
    for (std::size_t k = 0; k < cmd[i].size(); ++k) {
      d = std::max(d, std::abs(cmd[i + 1][k] - cmd[i][k]));
    }
    return d < eps;
  };
  const auto min_ns = static_cast<std::int64_t>(min_duration_s * 1e9);

  std::vector<std::size_t> keep;
  keep.reserve(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && idle_pair(j)) ++j;
    if (j > i && recs[j].timestamp_ns - recs[i].timestamp_ns > min_ns) {
      keep.push_back(i);
      keep.push_back(j);
    } else {
      for (std::size_t k = i; k <= j; ++k) keep.push_back(k);
    }
    i = j + 1;
  }

  Episode out = subset(episode, keep);
  out.marks = episode.marks;
  FilterReport rep;
  rep.input_records = n;
  rep.output_records = keep.size();
  rep.idle_removed = n - keep.size();
  rep.episodes_kept = 1;
  if (rep.idle_removed > 0) {
    rep.reasons.push_back(std::to_string(rep.idle_removed) + " idle records removed");
  }
  return {std::move(out), rep};
}

ReplayReport replay(const Episode& episode, BusClient& bus, double speed,
                    const std::atomic<bool>* cancel) {
  if (!(speed > 0.0)) throw std::invalid_argument("replay speed must be positive");
  episode.validate();
  ReplayReport rep;
  if (episode.records.empty()) return rep;
  const auto start = std::chrono::steady_clock::now();
  const auto t0 = episode.records.front().timestamp_ns;
  for (const auto& r : episode.records) {
    if (cancel && cancel->load()) break;
    const auto offset = std::chrono::nanoseconds(
        static_cast<std::int64_t>(static_cast<double>(r.timestamp_ns - t0) / speed));
    std::this_thread::sleep_until(start + offset);
    bus.publish(MsgType::kCmd, encode_doubles(r.command));
    ++rep.published;
  }
  rep.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

nlohmann::json EpisodeStats::to_json(const Layout& layout) const {
  auto table = [](const std::vector<std::string>& names, const NormalizationStats& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < s.size(); ++i) {
      rows.push_back({{"name", names[i]}, {"mean", s.offset[i]}, {"std", s.scale[i]}});
    }
    return rows;
  };
  return {{"records", records},
          {"duration_s", duration_s},
          {"command", table(layout.command_names(), command)},
          {"state", table(layout.state_names(), state)},
          {"normalization", command.to_json()}};
}

EpisodeStats episode_stats(std::span<const Episode> episodes) {
  EpisodeStats s;
  std::vector<std::vector<double>> cmds;
  std::vector<std::vector<double>> states;
  for (const auto& ep : episodes) {
    s.duration_s += ep.duration_s();
    for (const auto& r : ep.records) {
      cmds.push_back(r.command);
      states.push_back(r.state);
    }
  }
  s.records = cmds.size();
  if (s.records == 0) throw ValidationError("no records to compute statistics from");
  s.command = compute_stats(cmds);
  s.state = compute_stats(states);
  return s;
}

}  // namespace tw2
