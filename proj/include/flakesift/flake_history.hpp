// Copyright 2026 The Flakesift Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Windowed flake rate: the fraction of the w builds before n in which a
// test was labelled FLAKY. The denominator is always w, also near the start
// of the corpus where fewer than w builds exist.

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flakesift/core.hpp"
#include "flakesift/error.hpp"
#include "flakesift/rational.hpp"
#include "flakesift/store.hpp"

namespace flakesift {

inline constexpr int kDefaultWindow = 35;

struct FlakeRate {
  int flaked = 0;  // builds in the window where the test was FLAKY
  int window = 1;

  Rational value() const { return Rational(flaked, window); }
  double to_double() const noexcept { return static_cast<double>(flaked) / window; }
  bool positive() const noexcept { return flaked > 0; }
  friend bool operator==(const FlakeRate&, const FlakeRate&) = default;
};

class FlakeHistoryIndex {
 public:
  FlakeHistoryIndex() = default;

  /// Index over the given records. A FAULT_REVEALING build is not a flake.
  static FlakeHistoryIndex from_records(std::span<const TestExecutionRecord> records,
                                        int max_attempts = kDefaultMaxAttempts) {
    FlakeHistoryIndex idx;
    for (const auto& r : records) {
      idx.note_build(r.build_id);
      if (label_outcome(r.attempts, max_attempts) == OutcomeLabel::kFlaky)
        idx.add_flake(r.test_id, r.build_id);
    }
    idx.finalize();
    return idx;
  }

  static FlakeHistoryIndex from_reader(const CorpusReader& reader, const std::vector<BuildId>& builds,
                                       int max_attempts = kDefaultMaxAttempts) {
    FlakeHistoryIndex idx;
    for (auto b : builds) {
      idx.note_build(b);
      for (const auto& r : reader.read_build(b))
        if (label_outcome(r.attempts, max_attempts) == OutcomeLabel::kFlaky)
          idx.add_flake(r.test_id, r.build_id);
    }
    idx.finalize();
    return idx;
  }

  void note_build(BuildId b) {
    if (!range_) range_ = BuildRange{b, b};
    range_->lo = std::min(range_->lo, b);
    range_->hi = std::max(range_->hi, b);
  }

  void add_flake(const std::string& test_id, BuildId b) {
    note_build(b);
    flakes_[test_id].push_back(b);
    dirty_ = true;
  }

  /// Sorts and dedups per-test build lists; call after the last add_flake.
  void finalize() {
    for (auto& [_, v] : flakes_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    dirty_ = false;
  }

  /// Flake rate of `test_id` at build n over the builds [n - w, n - 1].
  /// Unknown tests have rate 0. Throws for w < 1.
  FlakeRate flake_rate(const std::string& test_id, BuildId n, int window = kDefaultWindow) const {
    if (window < 1) throw Error("flake_rate: window must be >= 1");
    if (dirty_) throw Error("flake_rate: index not finalized");
    auto it = flakes_.find(test_id);
    if (it == flakes_.end()) return {0, window};
    const auto& v = it->second;
    auto lo = std::lower_bound(v.begin(), v.end(), n - window);
    auto hi = std::lower_bound(v.begin(), v.end(), n);
    return {static_cast<int>(hi - lo), window};
  }

  const std::vector<BuildId>* flaky_builds(const std::string& test_id) const {
    auto it = flakes_.find(test_id);
    return it == flakes_.end() ? nullptr : &it->second;
  }

  std::optional<BuildRange> range() const noexcept { return range_; }
  std::size_t test_count() const noexcept { return flakes_.size(); }

 private:
  std::unordered_map<std::string, std::vector<BuildId>> flakes_;
  std::optional<BuildRange> range_;
  bool dirty_ = false;
};

struct HistoryPoint {
  std::string test_id;
  BuildId build_id = 0;
  OutcomeLabel label = OutcomeLabel::kFlaky;
};

struct WindowScanRow {
  int window = 0;
  std::size_t zero_rate = 0;  // points with flake_rate == 0
  std::size_t total = 0;
};

/// For each window size, how many failing points have no flake history.
inline std::vector<WindowScanRow> window_convergence_scan(const FlakeHistoryIndex& index,
                                                          std::span<const HistoryPoint> points,
                                                          std::vector<int> windows) {
  if (windows.empty()) throw Error("window_convergence_scan: no windows given");
  std::sort(windows.begin(), windows.end());
  std::vector<WindowScanRow> out;
  for (int w : windows) {
    WindowScanRow row{w, 0, points.size()};
    for (const auto& p : points)
      if (!index.flake_rate(p.test_id, p.build_id, w).positive()) ++row.zero_rate;
    out.push_back(row);
  }
  return out;
}

struct ClassHistorySummary {
  OutcomeLabel label = OutcomeLabel::kFlaky;
  std::size_t points = 0;
  std::optional<Rational> fraction_positive;  // rate > 0; absent when points == 0
  std::optional<Rational> fraction_one;       // rate == 1
  std::vector<std::size_t> histogram;         // index k counts points with rate k / w
};

struct HistoryDistribution {
  int window = kDefaultWindow;
  ClassHistorySummary flaky{OutcomeLabel::kFlaky, 0, std::nullopt, std::nullopt, {}};
  ClassHistorySummary fault_revealing{OutcomeLabel::kFaultRevealing, 0, std::nullopt, std::nullopt, {}};
};

inline HistoryDistribution history_distribution(const FlakeHistoryIndex& index,
                                                std::span<const HistoryPoint> points,
                                                int window = kDefaultWindow) {
  HistoryDistribution d;
  d.window = window;
  std::size_t pos[2] = {0, 0}, one[2] = {0, 0};
  for (auto* s : {&d.flaky, &d.fault_revealing}) s->histogram.assign(window + 1, 0);
  for (const auto& p : points) {
    int c;
    if (p.label == OutcomeLabel::kFlaky) c = 0;
    else if (p.label == OutcomeLabel::kFaultRevealing) c = 1;
    else throw Error("history_distribution: points must be FLAKY or FAULT_REVEALING");
    auto& s = c == 0 ? d.flaky : d.fault_revealing;
    const auto rate = index.flake_rate(p.test_id, p.build_id, window);
    ++s.points;
    ++s.histogram[rate.flaked];
    if (rate.flaked > 0) ++pos[c];
    if (rate.flaked == window) ++one[c];
  }
  for (int c = 0; c < 2; ++c) {
    auto& s = c == 0 ? d.flaky : d.fault_revealing;
    if (s.points == 0) continue;
    s.fraction_positive = Rational(static_cast<std::int64_t>(pos[c]), static_cast<std::int64_t>(s.points));
    s.fraction_one = Rational(static_cast<std::int64_t>(one[c]), static_cast<std::int64_t>(s.points));
  }
  return d;
}

/// CSV with columns class,rate_bucket,count; rate_bucket is "k/w".
inline void write_history_csv(std::ostream& out, const HistoryDistribution& d) {
  out << "class,rate_bucket,count\n";
  for (const auto* s : {&d.flaky, &d.fault_revealing})
    for (std::size_t k = 0; k < s->histogram.size(); ++k)
      out << to_string(s->label) << ',' << k << '/' << d.window << ',' << s->histogram[k] << '\n';
}

/// One point per (test, build) that labelled FLAKY or FAULT_REVEALING.
inline std::vector<HistoryPoint> failing_points(std::span<const TestExecutionRecord> records,
                                                int max_attempts = kDefaultMaxAttempts) {
  std::vector<HistoryPoint> out;
  for (const auto& r : records) {
    const auto l = label_outcome(r.attempts, max_attempts);
    if (l == OutcomeLabel::kFlaky || l == OutcomeLabel::kFaultRevealing)
      out.push_back({r.test_id, r.build_id, l});
  }
  return out;
}

}  // namespace flakesift
