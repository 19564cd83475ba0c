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

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "test_support.hpp"

using namespace flakesift;
using namespace flakesift::testing;

namespace {

struct RandomCorpus {
  std::vector<TestExecutionRecord> records;
  std::vector<std::string> tests;
  BuildId first = 0, last = 0;
};

RandomCorpus random_corpus(std::uint64_t seed, int builds, int tests) {
  CounterRng rng(seed, 0);
  RandomCorpus c;
  c.first = 100;
  c.last = c.first + builds - 1;
  for (int t = 0; t < tests; ++t) c.tests.push_back("S.t" + std::to_string(t));
  const double p = rng.uniform(0.01, 0.5);
  for (BuildId b = c.first; b <= c.last; ++b)
    for (const auto& t : c.tests) {
      const double u = rng.uniform01();
      if (u < p) c.records.push_back(record(b, t, flaky_attempts(1 + static_cast<int>(rng.uniform(5)))));
      else if (u < p + 0.03) c.records.push_back(record(b, t, fault_attempts()));
      else if (u < p + 0.05) c.records.push_back(record(b, t, {skip()}));
      else c.records.push_back(record(b, t, {pass()}));
    }
  return c;
}

// Direct rescan: walk every record and count FLAKY ones in [n - w, n - 1].
int brute_count(const std::vector<TestExecutionRecord>& rs, const std::string& test, BuildId n, int w) {
  int count = 0;
  for (const auto& r : rs)
    if (r.test_id == test && r.build_id >= n - w && r.build_id <= n - 1 &&
        r.attempts.back().status == RunStatus::kPass && r.attempts.size() > 1)
      ++count;
  return count;
}

}  // namespace

TEST(FlakeRate, NeverFlakyIsZero) {
  std::vector<TestExecutionRecord> rs;
  for (BuildId b = 1; b <= 50; ++b) rs.push_back(record(b, "S.a", {pass()}));
  const auto idx = FlakeHistoryIndex::from_records(rs);
  for (BuildId n = 1; n <= 50; ++n) EXPECT_EQ(idx.flake_rate("S.a", n).flaked, 0);
  EXPECT_EQ(idx.flake_rate("never.seen", 10), (FlakeRate{0, kDefaultWindow}));
}

TEST(FlakeRate, AlwaysFlakyIsOne) {
  std::vector<TestExecutionRecord> rs;
  for (BuildId b = 1; b <= 36; ++b) rs.push_back(record(b, "S.a", flaky_attempts(1)));
  const auto idx = FlakeHistoryIndex::from_records(rs);
  EXPECT_EQ(idx.flake_rate("S.a", 36, 35).value(), Rational(1, 1));
}

TEST(FlakeRate, FiveOfThirtyFive) {
  const BuildId n = 100;
  std::vector<TestExecutionRecord> rs;
  for (BuildId b = 1; b <= n; ++b) {
    const bool flaked = b == n - 1 || b == n - 3 || b == n - 8 || b == n - 20 || b == n - 35;
    rs.push_back(record(b, "S.a", flaked ? flaky_attempts(1) : std::vector{pass()}));
  }
  const auto idx = FlakeHistoryIndex::from_records(rs);
  const auto r = idx.flake_rate("S.a", n, 35);
  EXPECT_EQ(r.flaked, brute_count(rs, "S.a", n, 35));
  EXPECT_EQ(r.value(), Rational(5, 35));
  EXPECT_EQ(r.value(), Rational(1, 7));
  // n - 35 drops out with a 34-build window.
  EXPECT_EQ(idx.flake_rate("S.a", n, 34).flaked, 4);
}

TEST(FlakeRate, FaultRevealingIsNotAFlake) {
  const auto idx = FlakeHistoryIndex::from_records(
      std::vector{record(1, "S.a", fault_attempts()), record(2, "S.a", {pass()})});
  EXPECT_EQ(idx.flake_rate("S.a", 2).flaked, 0);
}

TEST(FlakeRate, EarlyBuildsKeepFullDenominator) {
  const auto idx = FlakeHistoryIndex::from_records(
      std::vector{record(1, "S.a", flaky_attempts(1)), record(2, "S.a", {pass()})});
  const auto r = idx.flake_rate("S.a", 2, 35);
  EXPECT_EQ(r.window, 35);
  EXPECT_EQ(r.value(), Rational(1, 35));
}

TEST(FlakeRate, CurrentBuildIsExcluded) {
  const auto idx = FlakeHistoryIndex::from_records(std::vector{record(5, "S.a", flaky_attempts(1))});
  EXPECT_EQ(idx.flake_rate("S.a", 5).flaked, 0);
  EXPECT_EQ(idx.flake_rate("S.a", 6).flaked, 1);
}

TEST(FlakeRate, ZeroWindowIsAnError) {
  const auto idx = FlakeHistoryIndex::from_records(std::vector{record(5, "S.a", {pass()})});
  EXPECT_THROW(idx.flake_rate("S.a", 5, 0), Error);
}

TEST(FlakeRate, MatchesBruteForceOnRandomCorpora) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    CounterRng rng(seed, 99);
    const int builds = 20 + static_cast<int>(rng.uniform(181));
    const auto c = random_corpus(seed, builds, 6);
    const auto idx = FlakeHistoryIndex::from_records(c.records);
    for (int q = 0; q < 300; ++q) {
      const auto& t = c.tests[rng.uniform(c.tests.size())];
      const BuildId n = c.first + static_cast<BuildId>(rng.uniform(static_cast<std::uint64_t>(builds)));
      const int w = 1 + static_cast<int>(rng.uniform(60));
      const auto r = idx.flake_rate(t, n, w);
      ASSERT_EQ(r.flaked, brute_count(c.records, t, n, w)) << "seed " << seed << " " << t << " n=" << n << " w=" << w;
      EXPECT_GE(r.flaked, 0);
      EXPECT_LE(r.flaked, w);
      EXPECT_EQ(r.value(), Rational(r.flaked, w));
    }
  }
}

TEST(FlakeRate, MonotoneInWindow) {
  const auto c = random_corpus(11, 120, 5);
  const auto idx = FlakeHistoryIndex::from_records(c.records);
  for (const auto& t : c.tests)
    for (BuildId n = c.first; n <= c.last; n += 7) {
      int prev = 0;
      for (int w = 1; w <= 80; ++w) {
        const int cur = idx.flake_rate(t, n, w).flaked;
        EXPECT_LE(prev, cur);
        prev = cur;
      }
    }
}

TEST(FlakeRate, ShiftingFlakesOutOfWindowGivesZero) {
  const auto c = random_corpus(5, 80, 4);
  std::vector<TestExecutionRecord> shifted;
  const BuildId offset = 1000;
  for (auto r : c.records) {
    r.build_id -= offset;
    shifted.push_back(r);
  }
  shifted.push_back(record(c.last, "S.t0", {pass()}));
  const auto idx = FlakeHistoryIndex::from_records(shifted);
  for (const auto& t : c.tests) EXPECT_EQ(idx.flake_rate(t, c.last, 35).flaked, 0);
}

TEST(FlakeRate, ReaderAndRecordsAgree) {
  const auto c = random_corpus(3, 60, 5);
  const MemoryCorpus m(c.records);
  const auto a = FlakeHistoryIndex::from_records(c.records);
  const auto b = FlakeHistoryIndex::from_reader(m, m.build_ids());
  for (const auto& t : c.tests)
    for (BuildId n = c.first; n <= c.last; ++n) EXPECT_EQ(a.flake_rate(t, n), b.flake_rate(t, n));
}

TEST(WindowScan, NoFlakesMeansEveryPointAtZero) {
  std::vector<TestExecutionRecord> rs;
  for (BuildId b = 1; b <= 20; ++b) rs.push_back(record(b, "S.a", b % 4 ? std::vector{pass()} : fault_attempts()));
  const auto idx = FlakeHistoryIndex::from_records(rs);
  const auto points = failing_points(rs);
  ASSERT_EQ(points.size(), 5u);
  for (const auto& row : window_convergence_scan(idx, points, {5, 10, 40})) EXPECT_EQ(row.zero_rate, row.total);
}

TEST(WindowScan, ConstantBeyondFlakeDistance) {
  // Every failure has its only earlier flakes within 10 builds.
  std::vector<TestExecutionRecord> rs;
  for (int t = 0; t < 6; ++t) {
    const std::string id = "S.t" + std::to_string(t);
    const BuildId base = 200 * t + 100;
    const BuildId gap = 1 + t;  // 1..6, all within 10
    rs.push_back(record(base - gap, id, flaky_attempts(1)));
    rs.push_back(record(base - 10, id, flaky_attempts(1)));
    rs.push_back(record(base, id, fault_attempts()));
  }
  rs.push_back(record(1500, "S.fresh", fault_attempts()));
  const auto idx = FlakeHistoryIndex::from_records(rs);
  std::vector<HistoryPoint> points;
  for (const auto& r : rs)
    if (label_outcome(r.attempts) == OutcomeLabel::kFaultRevealing) points.push_back({r.test_id, r.build_id, OutcomeLabel::kFaultRevealing});
  const auto scan = window_convergence_scan(idx, points, {40, 5, 10, 15, 20, 25, 30, 35});
  ASSERT_EQ(scan.size(), 8u);
  EXPECT_EQ(scan.front().window, 5);
  for (std::size_t i = 1; i < scan.size(); ++i) EXPECT_LE(scan[i].zero_rate, scan[i - 1].zero_rate);
  for (const auto& row : scan)
    if (row.window >= 10) { EXPECT_EQ(row.zero_rate, 1u); }
  EXPECT_EQ(scan.front().zero_rate, 2u);  // gap 6 is outside a 5-build window
}

TEST(WindowScan, RejectsEmptyWindowList) {
  EXPECT_THROW(window_convergence_scan(FlakeHistoryIndex{}, {}, {}), Error);
}

TEST(HistoryDistribution, NeverFlakyHistoryGivesZeroFractions) {
  std::vector<TestExecutionRecord> rs{record(1, "S.a", flaky_attempts(1)), record(1, "S.b", fault_attempts())};
  const auto idx = FlakeHistoryIndex::from_records(rs);
  const auto d = history_distribution(idx, failing_points(rs));
  EXPECT_EQ(d.flaky.fraction_positive, Rational(0, 1));
  EXPECT_EQ(d.fault_revealing.fraction_positive, Rational(0, 1));
  EXPECT_EQ(d.flaky.histogram[0], 1u);
}

TEST(HistoryDistribution, EmptyClassIsAbsent) {
  std::vector<TestExecutionRecord> rs{record(1, "S.a", flaky_attempts(1))};
  const auto idx = FlakeHistoryIndex::from_records(rs);
  const auto d = history_distribution(idx, failing_points(rs));
  EXPECT_TRUE(d.flaky.fraction_positive.has_value());
  EXPECT_FALSE(d.fault_revealing.fraction_positive.has_value());
  EXPECT_FALSE(d.fault_revealing.fraction_one.has_value());
}

TEST(HistoryDistribution, MatchesGeneratorLedger) {
  SynthConfig cfg;
  cfg.n_builds = 120;
  cfg.n_tests = 100;
  cfg.flaky_fraction = 0.3;
  cfg.flake_recurrence = 0.2;
  cfg.fault_pool_fraction = 0.1;
  cfg.fault_injection_rate = 0.5;
  cfg.seed = 4;
  const auto corpus = generate_corpus(cfg);
  const auto m = to_memory_corpus(corpus);
  const auto records = read_all(m);
  const auto idx = FlakeHistoryIndex::from_records(records);
  const auto d = history_distribution(idx, failing_points(records), 35);

  // Ledger side: flake builds per test, then count points with a flake in the window.
  std::map<std::string, std::vector<BuildId>> flakes;
  std::vector<LedgerEvent> points;
  for (const auto& e : corpus.ledger.events) {
    if (e.label == OutcomeLabel::kFlaky) flakes[e.test_id].push_back(e.build_id);
    if (e.label == OutcomeLabel::kFlaky || e.label == OutcomeLabel::kFaultRevealing) points.push_back(e);
  }
  std::int64_t pos[2] = {0, 0}, tot[2] = {0, 0};
  for (const auto& p : points) {
    const int c = p.label == OutcomeLabel::kFlaky ? 0 : 1;
    ++tot[c];
    for (auto b : flakes[p.test_id])
      if (b >= p.build_id - 35 && b < p.build_id) {
        ++pos[c];
        break;
      }
  }
  ASSERT_GT(tot[0], 0);
  ASSERT_GT(tot[1], 0);
  EXPECT_EQ(d.flaky.points, static_cast<std::size_t>(tot[0]));
  EXPECT_EQ(*d.flaky.fraction_positive, Rational(pos[0], tot[0]));
  EXPECT_EQ(*d.fault_revealing.fraction_positive, Rational(pos[1], tot[1]));
}

TEST(HistoryDistribution, CsvHasBucketPerRate) {
  std::vector<TestExecutionRecord> rs{record(1, "S.a", flaky_attempts(1)), record(2, "S.a", flaky_attempts(1))};
  const auto idx = FlakeHistoryIndex::from_records(rs);
  std::ostringstream out;
  write_history_csv(out, history_distribution(idx, failing_points(rs), 3));
  EXPECT_EQ(out.str(),
            "class,rate_bucket,count\n"
            "FLAKY,0/3,1\nFLAKY,1/3,1\nFLAKY,2/3,0\nFLAKY,3/3,0\n"
            "FAULT_REVEALING,0/3,0\nFAULT_REVEALING,1/3,0\nFAULT_REVEALING,2/3,0\nFAULT_REVEALING,3/3,0\n");
}
