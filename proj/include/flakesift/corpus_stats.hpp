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

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "flakesift/core.hpp"
#include "flakesift/store.hpp"

namespace flakesift {

struct CorpusStats {
  std::uint64_t builds = 0;
  std::uint64_t records = 0;

  // Unique tests. The first three overlap: a test can pass in one build and
  // flake in another.
  std::uint64_t tests_total = 0;
  std::uint64_t passing_tests = 0;          // PASS in >= 1 build
  std::uint64_t flaky_tests = 0;            // FLAKY in >= 1 build
  std::uint64_t fault_revealing_tests = 0;  // FAULT_REVEALING in >= 1 build
  std::uint64_t failed_tests = 0;           // flaky or fault-revealing somewhere
  std::uint64_t exclusively_flaky_tests = 0;
  std::uint64_t fault_revealing_flaky_tests = 0;  // fault-revealing and flaky in another build
  std::uint64_t skipped_records = 0;

  std::uint64_t flaky_failures = 0;
  std::uint64_t fault_triggering_failures = 0;

  // Per-build prevalence.
  double flaky_per_build_mean = 0;
  double flaky_per_build_stddev = 0;  // population
  double fault_revealing_per_failing_build_mean = 0;
  double fault_revealing_per_failing_build_stddev = 0;
  std::uint64_t fault_revealing_per_build_max = 0;
  std::uint64_t builds_with_flaky = 0;
  std::uint64_t builds_with_fault_revealing = 0;
  // Builds containing >= 1 fault-revealing test that flaked in an earlier build.
  std::uint64_t builds_with_fault_revealing_flaky = 0;
  // Builds whose fault-revealing tests all flaked in an earlier build.
  std::uint64_t builds_exclusively_fault_revealing_flaky = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

namespace detail {

inline void mean_stddev(const std::vector<std::uint64_t>& xs, double& mean, double& stddev) {
  mean = stddev = 0;
  if (xs.empty()) return;
  double sum = 0;
  for (auto x : xs) sum += static_cast<double>(x);
  mean = sum / static_cast<double>(xs.size());
  double sq = 0;
  for (auto x : xs) sq += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
  stddev = std::sqrt(sq / static_cast<double>(xs.size()));
}

}  // namespace detail

/// Single pass over the corpus in build order. Throws on an empty corpus.
inline CorpusStats corpus_stats(const CorpusReader& reader, int max_attempts = kDefaultMaxAttempts) {
  const auto builds = reader.build_ids();
  if (builds.empty()) throw Error("corpus_stats: empty corpus");

  struct TestFlags {
    bool pass = false, flaky = false, fault = false;
  };
  std::unordered_map<std::string, TestFlags> tests;
  std::unordered_set<std::string> flaked_before;  // flaked in a build already scanned
  std::vector<std::uint64_t> flaky_per_build, fault_per_failing_build;

  CorpusStats s;
  s.builds = builds.size();
  for (auto b : builds) {
    const auto records = reader.read_build(b);
    std::uint64_t n_flaky = 0, n_fault = 0, n_fault_with_history = 0;
    std::vector<const std::string*> flaked_now;
    for (const auto& r : records) {
      ++s.records;
      auto& t = tests[r.test_id];
      switch (label_outcome(r.attempts, max_attempts)) {
        case OutcomeLabel::kPass:
          t.pass = true;
          break;
        case OutcomeLabel::kSkipped:
          ++s.skipped_records;
          break;
        case OutcomeLabel::kFlaky:
          t.flaky = true;
          ++n_flaky;
          flaked_now.push_back(&r.test_id);
          for (const auto& a : r.attempts) s.flaky_failures += is_failing(a.status);
          break;
        case OutcomeLabel::kFaultRevealing:
          t.fault = true;
          ++n_fault;
          if (flaked_before.contains(r.test_id)) ++n_fault_with_history;
          s.fault_triggering_failures += r.attempts.size();
          break;
      }
    }
    for (const auto* id : flaked_now) flaked_before.insert(*id);
    flaky_per_build.push_back(n_flaky);
    if (n_flaky > 0) ++s.builds_with_flaky;
    if (n_fault > 0) {
      ++s.builds_with_fault_revealing;
      fault_per_failing_build.push_back(n_fault);
      s.fault_revealing_per_build_max = std::max(s.fault_revealing_per_build_max, n_fault);
      if (n_fault_with_history > 0) ++s.builds_with_fault_revealing_flaky;
      if (n_fault_with_history == n_fault) ++s.builds_exclusively_fault_revealing_flaky;
    }
  }

  s.tests_total = tests.size();
  for (const auto& [_, t] : tests) {
    s.passing_tests += t.pass;
    s.flaky_tests += t.flaky;
    s.fault_revealing_tests += t.fault;
    s.failed_tests += (t.flaky || t.fault);
    s.exclusively_flaky_tests += (t.flaky && !t.fault);
    s.fault_revealing_flaky_tests += (t.flaky && t.fault);
  }
  detail::mean_stddev(flaky_per_build, s.flaky_per_build_mean, s.flaky_per_build_stddev);
  detail::mean_stddev(fault_per_failing_build, s.fault_revealing_per_failing_build_mean,
                      s.fault_revealing_per_failing_build_stddev);
  return s;
}

inline Json corpus_stats_to_json(const CorpusStats& s) {
  return Json{
      {"builds", s.builds},
      {"records", s.records},
      {"skipped_records", s.skipped_records},
      {"tests",
       {{"total", s.tests_total},
        {"passing", s.passing_tests},
        {"flaky", s.flaky_tests},
        {"fault_revealing", s.fault_revealing_tests},
        {"failed", s.failed_tests},
        {"exclusively_flaky", s.exclusively_flaky_tests},
        {"fault_revealing_flaky", s.fault_revealing_flaky_tests}}},
      {"failures", {{"flaky", s.flaky_failures}, {"fault_triggering", s.fault_triggering_failures}}},
      {"per_build",
       {{"flaky_mean", s.flaky_per_build_mean},
        {"flaky_stddev", s.flaky_per_build_stddev},
        {"fault_revealing_per_failing_build_mean", s.fault_revealing_per_failing_build_mean},
        {"fault_revealing_per_failing_build_stddev", s.fault_revealing_per_failing_build_stddev},
        {"fault_revealing_max", s.fault_revealing_per_build_max}}},
      {"builds_containing",
       {{"flaky", s.builds_with_flaky},
        {"fault_revealing", s.builds_with_fault_revealing},
        {"fault_revealing_flaky", s.builds_with_fault_revealing_flaky},
        {"exclusively_fault_revealing_flaky", s.builds_exclusively_fault_revealing_flaky}}}};
}

}  // namespace flakesift
