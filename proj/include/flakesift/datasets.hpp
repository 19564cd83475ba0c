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

// Dataset assembly for the three experiment families:
//
//  * test level: one row per unique test, flaky tests against fault-revealing
//    tests plus the tests passing in the last training build;
//  * failure level (training): flaky failures against fault-triggering
//    failures plus one row per passing execution of the anchor build;
//  * failure level (evaluation): every flaky and fault-triggering failure of
//    a build range.
//
// Assembly produces a SampleSet (provenance, source reference, raw execution
// values, label). Turning it into numbers needs a vocabulary, which only
// training data may decide: see to_feature_matrix.

#include <algorithm>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "flakesift/core.hpp"
#include "flakesift/features.hpp"
#include "flakesift/flake_history.hpp"
#include "flakesift/store.hpp"

namespace flakesift {

enum class SampleOrigin : std::uint8_t {
  kFlakyTest,
  kFaultRevealingTest,
  kPassingTest,
  kFlakyFailure,
  kFaultTriggeringFailure,
  kPassingExecution,
};

struct Sample {
  RowProvenance provenance;
  std::size_t source = 0;  // index into SampleSet::sources
  ExecutionValues exec;
  FlakeRate rate;
  std::uint8_t label = 0;  // 1 = flaky
  SampleOrigin origin = SampleOrigin::kFlakyFailure;
};

class SampleSet {
 public:
  std::vector<std::string> sources;
  std::vector<Sample> samples;

  std::size_t intern(const std::string& text) {
    auto [it, inserted] = index_.try_emplace(text, sources.size());
    if (inserted) sources.push_back(text);
    return it->second;
  }

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t count(std::uint8_t label) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [label](const Sample& s) { return s.label == label; }));
  }

  /// Sort by (build, test, attempt) so rows carry time order.
  void sort_by_time() {
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
      return std::tie(a.provenance.build_id, a.provenance.test_id, a.provenance.attempt_index) <
             std::tie(b.provenance.build_id, b.provenance.test_id, b.provenance.attempt_index);
    });
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Which tests may not be used as non-flaky examples.
enum class NegativeExclusion {
  kTrainingRange,  // tests flaky in any training build (reads no later build)
  kWholeCorpus,    // tests flaky in any corpus build (reads holdout builds)
};

struct TestLevelLedger {
  std::size_t positives = 0;                 // flaky in >= 1 training build
  std::size_t negatives_fault_revealing = 0; // fault-revealing in training
  std::size_t negatives_passing = 0;         // passing in the anchor build only
  std::size_t excluded = 0;                  // negative candidates dropped as flaky
  BuildId anchor_build = 0;
};

struct TestLevelDataset {
  SampleSet set;
  TestLevelLedger ledger;
  /// Source of every test seen in training, from its latest training build.
  std::unordered_map<std::string, std::string> latest_source;
};

inline TestLevelDataset assemble_test_level(const CorpusReader& reader, const BuildRange& train,
                                            int window = kDefaultWindow,
                                            NegativeExclusion exclusion = NegativeExclusion::kTrainingRange,
                                            int max_attempts = kDefaultMaxAttempts) {
  const auto builds = reader.build_ids_in(train);
  if (builds.empty()) throw Error("assemble_test_level: no builds in training range");
  const BuildId anchor = builds.back();

  struct TestInfo {
    BuildId last_flaky = -1, last_fault = -1;
    bool passes_at_anchor = false;
  };
  std::unordered_map<std::string, TestInfo> info;
  std::unordered_set<std::string> ever_flaky;
  FlakeHistoryIndex history;
  TestLevelDataset ds;
  ds.ledger.anchor_build = anchor;

  for (auto b : builds) {
    history.note_build(b);
    for (auto& r : reader.read_build(b)) {
      const auto label = label_outcome(r.attempts, max_attempts);
      auto& t = info[r.test_id];
      if (label == OutcomeLabel::kFlaky) {
        t.last_flaky = b;
        ever_flaky.insert(r.test_id);
        history.add_flake(r.test_id, b);
      } else if (label == OutcomeLabel::kFaultRevealing) {
        t.last_fault = b;
      } else if (label == OutcomeLabel::kPass && b == anchor) {
        t.passes_at_anchor = true;
      }
      ds.latest_source[r.test_id] = std::move(r.test_source);
    }
  }
  history.finalize();
  if (exclusion == NegativeExclusion::kWholeCorpus) {
    for (auto b : reader.build_ids()) {
      if (train.contains(b)) continue;
      for (const auto& r : reader.read_build(b))
        if (label_outcome(r.attempts, max_attempts) == OutcomeLabel::kFlaky) ever_flaky.insert(r.test_id);
    }
  }

  for (const auto& [id, t] : info) {
    Sample s;
    s.provenance = {id, 0, -1};
    if (t.last_flaky >= 0) {
      s.label = 1;
      s.origin = SampleOrigin::kFlakyTest;
      s.provenance.build_id = t.last_flaky;
      ++ds.ledger.positives;
    } else if (t.last_fault >= 0 || t.passes_at_anchor) {
      if (ever_flaky.contains(id)) {
        ++ds.ledger.excluded;
        continue;
      }
      s.label = 0;
      if (t.last_fault >= 0) {
        s.origin = SampleOrigin::kFaultRevealingTest;
        s.provenance.build_id = t.last_fault;
        ++ds.ledger.negatives_fault_revealing;
      } else {
        s.origin = SampleOrigin::kPassingTest;
        s.provenance.build_id = anchor;
        ++ds.ledger.negatives_passing;
      }
    } else {
      continue;
    }
    s.source = ds.set.intern(ds.latest_source.at(id));
    s.rate = history.flake_rate(id, s.provenance.build_id, window);
    s.exec.flake_rate = s.rate.to_double();
    ds.set.samples.push_back(std::move(s));
  }
  if (ds.ledger.positives == 0) throw Error("assemble_test_level: no flaky tests in training range");
  if (ds.ledger.negatives_fault_revealing + ds.ledger.negatives_passing == 0)
    throw Error("assemble_test_level: no non-flaky tests in training range");
  ds.set.sort_by_time();
  return ds;
}

enum class FailureSetRole { kTraining, kEvaluation };

struct FailureLevelLedger {
  std::size_t flaky_failures = 0;
  std::size_t fault_triggering_failures = 0;
  std::size_t passing_executions = 0;
  BuildId anchor_build = 0;
};

struct FailureLevelDataset {
  SampleSet set;
  FailureLevelLedger ledger;
};

/// Failure-level rows for `range`. Flake rates use the `window` builds
/// before each failure: training data only looks inside the range, while
/// evaluation data may look back into the builds preceding it.
inline FailureLevelDataset assemble_failure_level(const CorpusReader& reader, const BuildRange& range,
                                                  FailureSetRole role, int window = kDefaultWindow,
                                                  int max_attempts = kDefaultMaxAttempts) {
  const auto builds = reader.build_ids_in(range);
  if (builds.empty()) throw Error("assemble_failure_level: no builds in range");
  const BuildId anchor = builds.back();

  std::vector<BuildId> to_read;
  if (role == FailureSetRole::kEvaluation) {
    for (auto b : reader.build_ids())
      if (b >= range.lo - window && b < range.lo) to_read.push_back(b);
  }
  to_read.insert(to_read.end(), builds.begin(), builds.end());

  FailureLevelDataset ds;
  ds.ledger.anchor_build = anchor;
  FlakeHistoryIndex history;
  std::vector<TestExecutionRecord> in_range;
  for (auto b : to_read) {
    history.note_build(b);
    for (auto& r : reader.read_build(b)) {
      if (label_outcome(r.attempts, max_attempts) == OutcomeLabel::kFlaky) history.add_flake(r.test_id, b);
      if (range.contains(b)) in_range.push_back(std::move(r));
    }
  }
  history.finalize();

  for (const auto& r : in_range) {
    const auto label = label_outcome(r.attempts, max_attempts);
    const bool anchor_pass =
        role == FailureSetRole::kTraining && label == OutcomeLabel::kPass && r.build_id == anchor;
    if (label != OutcomeLabel::kFlaky && label != OutcomeLabel::kFaultRevealing && !anchor_pass) continue;
    const auto rate = history.flake_rate(r.test_id, r.build_id, window);
    const auto src = ds.set.intern(r.test_source);
    for (std::size_t i = 0; i < r.attempts.size(); ++i) {
      const auto& a = r.attempts[i];
      if (!anchor_pass && !is_failing(a.status)) continue;
      Sample s;
      s.provenance = {r.test_id, r.build_id, static_cast<int>(i)};
      s.source = src;
      s.rate = rate;
      s.exec = {a.duration, rate.to_double(), a.status, a.tag_status};
      if (anchor_pass) {
        s.label = 0;
        s.origin = SampleOrigin::kPassingExecution;
        ++ds.ledger.passing_executions;
      } else if (label == OutcomeLabel::kFlaky) {
        s.label = 1;
        s.origin = SampleOrigin::kFlakyFailure;
        ++ds.ledger.flaky_failures;
      } else {
        s.label = 0;
        s.origin = SampleOrigin::kFaultTriggeringFailure;
        ++ds.ledger.fault_triggering_failures;
      }
      ds.set.samples.push_back(std::move(s));
    }
  }
  if (role == FailureSetRole::kTraining) {
    if (ds.ledger.flaky_failures == 0) throw Error("assemble_failure_level: no flaky failures in training range");
    if (ds.ledger.fault_triggering_failures + ds.ledger.passing_executions == 0)
      throw Error("assemble_failure_level: no non-flaky rows in training range");
  } else if (ds.set.samples.empty()) {
    throw Error("assemble_failure_level: no failures in evaluation range");
  }
  ds.set.sort_by_time();
  return ds;
}

/// Vectorizes a sample set against a frozen vocabulary. Each distinct
/// source is tokenized once.
inline FeatureMatrix to_feature_matrix(const SampleSet& set, const Vocabulary& vocab,
                                       const ExecutionFeatureSet& exec = {}) {
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> encoded(set.sources.size());
  std::vector<bool> done(set.sources.size(), false);
  FeatureMatrix m;
  m.token_cols = vocab.size();
  m.dense_names = exec.column_names();
  for (const auto& s : set.samples) {
    if (!done[s.source]) {
      encoded[s.source] = vocab.transform(set.sources[s.source]);
      done[s.source] = true;
    }
    m.push_row(encoded[s.source], encode_execution(s.exec, exec), s.provenance, s.label);
  }
  return m;
}

/// Sources actually referenced by samples, in first-use order.
inline std::vector<std::string> referenced_sources(const SampleSet& set) {
  std::vector<bool> used(set.sources.size(), false);
  std::vector<std::string> out;
  for (const auto& s : set.samples)
    if (!used[s.source]) {
      used[s.source] = true;
      out.push_back(set.sources[s.source]);
    }
  return out;
}

}  // namespace flakesift
