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


// Randomized episodes for the recorder properties.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "tw2/episode.hpp"

namespace tw2::testing {

inline constexpr std::int64_t kMillis = 1'000'000;

// Random valid episode: strictly increasing timestamps, sparse frames, marks.
inline Episode random_episode(std::mt19937_64& rng, const EpisodeHeader& header,
                              std::size_t max_records = 40) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> count(0, max_records);
  std::uniform_int_distribution<std::int64_t> step(1, 50 * kMillis);
  std::bernoulli_distribution coin(0.3);
  Episode ep;
  ep.header = header;
  if (coin(rng)) {
    NormalizationStats s;
    for (std::size_t i = 0; i < header.layout.command_dim(); ++i) {
      s.offset.push_back(g(rng));
      s.scale.push_back(0.5 + std::abs(g(rng)));
    }
    ep.header.stats = s;
  }
  const std::size_t n = count(rng);
  std::int64_t t = step(rng);
  for (std::size_t i = 0; i < n; ++i) {
    EpisodeRecord r;
    r.timestamp_ns = t;
    t += step(rng);
    r.command.resize(header.layout.command_dim());
    r.state.resize(header.layout.state_dim());
    for (auto& x : r.command) x = g(rng);
    for (auto& x : r.state) x = g(rng);
    if (coin(rng)) {
      if (ep.frames.empty() || coin(rng)) {
        std::vector<std::uint8_t> jpeg(1 + rng() % 300);
        for (auto& b : jpeg) b = static_cast<std::uint8_t>(rng());
        ep.frames.push_back(std::move(jpeg));
      }
      r.frame = ep.frames.size() - 1;
    }
    ep.records.push_back(std::move(r));
  }
  const std::size_t marks = rng() % 6;
  for (std::size_t i = 0; i < marks; ++i) {
    ep.marks.push_back({static_cast<std::int64_t>(rng() % (t + 1)),
                        static_cast<MarkKind>(rng() % 5)});
  }
  std::sort(ep.marks.begin(), ep.marks.end(),
            [](const Mark& a, const Mark& b) { return a.timestamp_ns < b.timestamp_ns; });
  return ep;
}

// Piecewise-constant command values with random hold lengths and jitter
// below 1e-4, at least `n` long.
inline std::vector<double> piecewise_holds(std::mt19937_64& rng, std::size_t n = 200) {
  std::uniform_int_distribution<int> hold(1, 90);
  std::vector<double> values;
  double v = 0.0;
  while (values.size() < n) {
    v += 0.01 * static_cast<double>(1 + rng() % 5);
    const int k = hold(rng);
    for (int i = 0; i < k; ++i) values.push_back(v + 1e-5 * static_cast<double>(rng() % 10));
  }
  return values;
}

}  // namespace tw2::testing
