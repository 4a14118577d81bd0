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


#include "tw2/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <pthread.h>
#include <sched.h>

#include <spdlog/spdlog.h>

#include "tw2/payloads.hpp"

namespace tw2 {

void ActionChunk::validate(std::size_t dim) const {
  if (commands.size() != kChunkSteps) {
    throw ValidationError("action chunk must have " + std::to_string(kChunkSteps) + " steps");
  }
  for (const auto& row : commands) {
    if (row.size() != dim) throw ValidationError("action chunk row has the wrong dimension");
    for (double x : row) {
      if (!std::isfinite(x)) throw ValidationError("action chunk has non-finite entries");
    }
  }
}

HistoryBuffer::HistoryBuffer(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim) {
  if (capacity == 0) throw std::invalid_argument("history capacity must be positive");
}

void HistoryBuffer::push(std::vector<double> normalized) {
  if (normalized.size() != dim_) throw DimensionError("history row has the wrong dimension");
  if (rows_.size() == capacity_) rows_.pop_front();
  rows_.push_back(std::move(normalized));
}

std::vector<std::vector<double>> HistoryBuffer::snapshot() const {
  if (rows_.empty()) throw std::logic_error("history is empty");
  std::vector<std::vector<double>> out(capacity_ - rows_.size(), rows_.front());
  out.insert(out.end(), rows_.begin(), rows_.end());
  return out;
}

// ---------------------------------------------------------------- scheduler --

ChunkScheduler::ChunkScheduler(std::size_t execute_steps) : execute_(execute_steps) {
  if (execute_ == 0 || execute_ > kChunkSteps) {
    throw std::invalid_argument("executed steps must be in [1, 64]");
  }
}

void ChunkScheduler::offer(ActionChunk chunk) {
  if (chunk.source_seq <= last_seq_) return;
  last_seq_ = chunk.source_seq;
  mailbox_ = std::move(chunk);
}

void ChunkScheduler::engage_fallback() { fallback_ = true; }

bool ChunkScheduler::switch_to_mailbox() {
  if (!mailbox_) return false;
  current_ = std::move(*mailbox_);
  mailbox_.reset();
  step_ = 0;
  fallback_ = false;
  return true;
}

std::optional<Emission> ChunkScheduler::tick() {
  if (fallback_ && !switch_to_mailbox()) {
    if (!last_) return std::nullopt;
    return Emission{*last_, current_ ? current_->source_seq : 0, 0, false, true};
  }
  if (!current_ && !switch_to_mailbox()) return std::nullopt;
  if (step_ >= execute_) switch_to_mailbox();
  if (step_ < current_->commands.size()) {
    last_ = current_->commands[step_++];
    return Emission{*last_, current_->source_seq, step_, false, false};
  }
  return Emission{*last_, current_->source_seq, 0, true, false};
}

// ---------------------------------------------------------------- runner --

double RunnerStats::emit_rate_hz() const {
  if (emissions < 2) return 0.0;
  return static_cast<double>(emissions - 1) / (static_cast<double>(last_emit_ns - first_emit_ns) * 1e-9);
}

double RunnerStats::inference_rate_hz() const {
  if (inference_ok < 2) return 0.0;
  return static_cast<double>(inference_ok - 1) /
         (static_cast<double>(last_inference_ns - first_inference_ns) * 1e-9);
}

PolicyRunner::PolicyRunner(const Layout& layout, PolicyRunnerConfig config, Sink sink)
    : layout_(layout),
      config_(std::move(config)),
      sink_(std::move(sink)),
      client_(config_.endpoint_host, config_.endpoint_port),
      scheduler_(config_.execute_steps),
      history_(config_.history, layout.command_dim()) {
  if (!(config_.inference_hz > 0.0) || !(config_.exec_hz > 0.0)) {
    throw ConfigError("inference and execution rates must be positive");
  }
  if (config_.stats) config_.stats->validate();
  if (config_.initial_command.empty()) config_.initial_command.assign(layout.command_dim(), 0.0);
  if (config_.initial_command.size() != layout.command_dim()) {
    throw DimensionError("initial command does not match the layout");
  }
  history_.push(config_.stats ? normalize(config_.initial_command, *config_.stats)
                              : config_.initial_command);
  infer_ = std::thread([this] { infer_loop(); });
  ticker_ = std::thread([this] { tick_loop(); });
}

PolicyRunner::~PolicyRunner() { stop(); }

void PolicyRunner::stop() {
  running_ = false;
  if (infer_.joinable()) infer_.join();
  if (ticker_.joinable()) ticker_.join();
}

void PolicyRunner::set_image(std::vector<std::uint8_t> jpeg) {
  std::lock_guard lock(mu_);
  image_ = std::move(jpeg);
}

RunnerStats PolicyRunner::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void PolicyRunner::infer_loop() {
  const auto period = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / config_.inference_hz));
  auto next = std::chrono::steady_clock::now();
  while (running_) {
    std::this_thread::sleep_until(next);
    next += period;
    if (next < std::chrono::steady_clock::now()) next = std::chrono::steady_clock::now();

    std::vector<std::vector<double>> history;
    std::vector<std::uint8_t> image;
    {
      std::lock_guard lock(mu_);
      history = history_.snapshot();
      image = image_;
    }
    const std::int64_t issued = now_ns();
    try {
      const auto resp = client_.call(image, history, config_.timeout);
      ActionChunk chunk;
      chunk.issued_at_ns = issued;
      chunk.source_seq = resp.id;
      chunk.commands.reserve(resp.steps.size());
      for (const auto& row : resp.steps) {
        chunk.commands.push_back(config_.stats ? denormalize(row, *config_.stats) : row);
      }
      chunk.validate(layout_.command_dim());
      std::lock_guard lock(mu_);
      scheduler_.offer(std::move(chunk));
      if (stats_.inference_ok++ == 0) stats_.first_inference_ns = issued;
      stats_.last_inference_ns = issued;
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      if (stats_.inference_failed++ % 50 == 0) {
        spdlog::warn("policy: inference failed, holding last command: {}", e.what());
      }
      scheduler_.engage_fallback();
    }
  }
}

namespace {

void try_realtime(int priority) {
  if (priority <= 0) return;
  sched_param param{};
  param.sched_priority = priority;
  if (const int rc = pthread_setschedparam(pthread_self(), SCHED_FIFO, &param); rc != 0) {
    spdlog::warn("policy: SCHED_FIFO unavailable ({}), tick jitter follows the default scheduler",
                 std::strerror(rc));
  }
}

}  // namespace

void PolicyRunner::tick_loop() {
  try_realtime(config_.realtime_priority);
  const auto period = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / config_.exec_hz));
  auto next = std::chrono::steady_clock::now() + period;
  while (running_) {
    std::this_thread::sleep_until(next);
    next += period;
    std::optional<Emission> e;
    {
      std::lock_guard lock(mu_);
      e = scheduler_.tick();
      if (!e) continue;
      const std::int64_t t = now_ns();
      if (stats_.emissions > 0) {
        const double dt = static_cast<double>(t - stats_.last_emit_ns) * 1e-6;
        stats_.min_interval_ms = stats_.emissions == 1 ? dt : std::min(stats_.min_interval_ms, dt);
        stats_.max_interval_ms = std::max(stats_.max_interval_ms, dt);
        stats_.intervals_ms.push_back(dt);
      } else {
        stats_.first_emit_ns = t;
      }
      stats_.last_emit_ns = t;
      ++stats_.emissions;
      if (e->starved) ++stats_.starved_ticks;
      if (e->fallback) ++stats_.fallback_ticks;
      if (e->step > 0) {
        if (e->chunk_seq != chunk_in_flight_) {
          if (chunk_in_flight_ != 0) stats_.executed_per_chunk.push_back(chunk_steps_);
          chunk_in_flight_ = e->chunk_seq;
          chunk_steps_ = 0;
        }
        ++chunk_steps_;
      }
      history_.push(config_.stats ? normalize(e->command, *config_.stats) : e->command);
    }
    sink_(*e);
  }
}

PolicyRunner::Sink bus_sink(BusClient& bus) {
  return [&bus](const Emission& e) { bus.publish(MsgType::kCmd, encode_doubles(e.command)); };
}

}  // namespace tw2
