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

// Domain model: run statuses, per-build test executions, and the rerun
// decision procedure that turns an attempt sequence into an outcome label.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flakesift/error.hpp"

namespace flakesift {

using BuildId = std::int64_t;

/// Inclusive range of build ids.
struct BuildRange {
  BuildId lo = 0;
  BuildId hi = -1;

  bool contains(BuildId b) const noexcept { return b >= lo && b <= hi; }
  bool empty() const noexcept { return hi < lo; }
  friend bool operator==(const BuildRange&, const BuildRange&) = default;
};

enum class RunStatus : std::uint8_t { kAbort, kFail, kPass, kCrash, kSkip };

enum class RunTagStatus : std::uint8_t {
  kCrash,
  kPass,
  kFail,
  kTimeout,
  kSuccess,
  kFailure,
  kFailureOnExit,
  kNotRun,
  kSkip,
  kUnknown,
};

inline constexpr std::array<RunStatus, 5> kAllRunStatuses = {
    RunStatus::kAbort, RunStatus::kFail, RunStatus::kPass, RunStatus::kCrash, RunStatus::kSkip};

inline constexpr std::array<RunTagStatus, 10> kAllRunTagStatuses = {
    RunTagStatus::kCrash,   RunTagStatus::kPass,          RunTagStatus::kFail,
    RunTagStatus::kTimeout, RunTagStatus::kSuccess,       RunTagStatus::kFailure,
    RunTagStatus::kFailureOnExit, RunTagStatus::kNotRun,  RunTagStatus::kSkip,
    RunTagStatus::kUnknown};

inline std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::kAbort: return "ABORT";
    case RunStatus::kFail: return "FAIL";
    case RunStatus::kPass: return "PASS";
    case RunStatus::kCrash: return "CRASH";
    case RunStatus::kSkip: return "SKIP";
  }
  return "?";
}

inline std::string_view to_string(RunTagStatus s) noexcept {
  switch (s) {
    case RunTagStatus::kCrash: return "CRASH";
    case RunTagStatus::kPass: return "PASS";
    case RunTagStatus::kFail: return "FAIL";
    case RunTagStatus::kTimeout: return "TIMEOUT";
    case RunTagStatus::kSuccess: return "SUCCESS";
    case RunTagStatus::kFailure: return "FAILURE";
    case RunTagStatus::kFailureOnExit: return "FAILURE_ON_EXIT";
    case RunTagStatus::kNotRun: return "NOTRUN";
    case RunTagStatus::kSkip: return "SKIP";
    case RunTagStatus::kUnknown: return "UNKNOWN";
  }
  return "?";
}

inline std::optional<RunStatus> parse_run_status(std::string_view s) noexcept {
  for (auto v : kAllRunStatuses)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline std::optional<RunTagStatus> parse_run_tag_status(std::string_view s) noexcept {
  for (auto v : kAllRunTagStatuses)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

/// ABORT, FAIL and CRASH are all failing; only PASS and SKIP are not.
constexpr bool is_failing(RunStatus s) noexcept {
  return s != RunStatus::kPass && s != RunStatus::kSkip;
}

struct RunAttempt {
  RunStatus status = RunStatus::kPass;
  RunTagStatus tag_status = RunTagStatus::kPass;
  double duration = 0.0;  // seconds

  friend bool operator==(const RunAttempt&, const RunAttempt&) = default;
};

/// One test in one build, with every rerun attempt the CI made.
struct TestExecutionRecord {
  BuildId build_id = 0;
  std::string test_id;
  std::string test_suite;
  std::vector<RunAttempt> attempts;
  std::string test_source;

  friend bool operator==(const TestExecutionRecord&, const TestExecutionRecord&) = default;
};

enum class OutcomeLabel : std::uint8_t { kPass, kFlaky, kFaultRevealing, kSkipped };

inline std::string_view to_string(OutcomeLabel l) noexcept {
  switch (l) {
    case OutcomeLabel::kPass: return "PASS";
    case OutcomeLabel::kFlaky: return "FLAKY";
    case OutcomeLabel::kFaultRevealing: return "FAULT_REVEALING";
    case OutcomeLabel::kSkipped: return "SKIPPED";
  }
  return "?";
}

inline std::optional<OutcomeLabel> parse_outcome_label(std::string_view s) noexcept {
  for (auto l : {OutcomeLabel::kPass, OutcomeLabel::kFlaky, OutcomeLabel::kFaultRevealing,
                 OutcomeLabel::kSkipped})
    if (to_string(l) == s) return l;
  return std::nullopt;
}

enum class FailureKind : std::uint8_t { kFlakyFailure, kFaultTriggeringFailure };

inline std::string_view to_string(FailureKind k) noexcept {
  return k == FailureKind::kFlakyFailure ? "FLAKY_FAILURE" : "FAULT_TRIGGERING_FAILURE";
}

struct FailureRecord {
  BuildId build_id = 0;
  std::string test_id;
  FailureKind kind = FailureKind::kFlakyFailure;
  int attempt_index = 0;
  double duration = 0.0;
  RunStatus status = RunStatus::kFail;
  RunTagStatus tag_status = RunTagStatus::kFail;

  friend bool operator==(const FailureRecord&, const FailureRecord&) = default;
};

/// One initial run plus up to five reruns.
inline constexpr int kDefaultMaxAttempts = 6;

/// Applies the CI rerun decision tree. A first PASS or SKIP ends the
/// sequence; a failing first attempt is rerun until a PASS (FLAKY) or until
/// the budget is exhausted (FAULT_REVEALING).
///
/// Throws ValidationError for empty or over-long sequences, attempts after
/// a PASS, and SKIP after the first position; TruncatedRerunsError when
/// every attempt fails but fewer than max_attempts were recorded.
inline OutcomeLabel label_outcome(std::span<const RunAttempt> attempts,
                                  int max_attempts = kDefaultMaxAttempts) {
  if (max_attempts < 1) throw ValidationError("max_attempts must be positive");
  if (attempts.empty()) throw ValidationError("empty attempt sequence");
  if (attempts.size() > static_cast<std::size_t>(max_attempts))
    throw ValidationError("attempt sequence longer than max_attempts (" +
                          std::to_string(attempts.size()) + " > " +
                          std::to_string(max_attempts) + ")");

  const auto first = attempts.front().status;
  if (first == RunStatus::kPass || first == RunStatus::kSkip) {
    if (attempts.size() > 1) throw ValidationError("attempts recorded after a non-failing first run");
    return first == RunStatus::kPass ? OutcomeLabel::kPass : OutcomeLabel::kSkipped;
  }
  for (std::size_t i = 1; i < attempts.size(); ++i) {
    const auto s = attempts[i].status;
    if (s == RunStatus::kSkip) throw ValidationError("SKIP in the middle of a rerun sequence");
    if (s == RunStatus::kPass) {
      if (i + 1 != attempts.size()) throw ValidationError("attempts recorded after a PASS");
      return OutcomeLabel::kFlaky;
    }
  }
  if (attempts.size() != static_cast<std::size_t>(max_attempts))
    throw TruncatedRerunsError("truncated reruns: " + std::to_string(attempts.size()) +
                               " failing attempts, expected " + std::to_string(max_attempts));
  return OutcomeLabel::kFaultRevealing;
}

/// Full invariant check on a record; returns its label.
inline OutcomeLabel validate_record(const TestExecutionRecord& r,
                                    int max_attempts = kDefaultMaxAttempts) {
  const auto where = [&r] {
    return " (test_id=" + r.test_id + ", build_id=" + std::to_string(r.build_id) + ")";
  };
  if (r.test_id.empty()) throw ValidationError("empty test_id" + where());
  for (const auto& a : r.attempts)
    if (!std::isfinite(a.duration) || a.duration < 0)
      throw ValidationError("negative or non-finite duration" + where());
  try {
    return label_outcome(r.attempts, max_attempts);
  } catch (const TruncatedRerunsError& e) {
    throw TruncatedRerunsError(e.what() + where());
  } catch (const ValidationError& e) {
    throw ValidationError(e.what() + where());
  }
}

/// One FailureRecord per failing attempt of a FLAKY or FAULT_REVEALING
/// record, in attempt order.
inline std::vector<FailureRecord> extract_failures(const TestExecutionRecord& record,
                                                   int max_attempts = kDefaultMaxAttempts) {
  const auto label = validate_record(record, max_attempts);
  std::vector<FailureRecord> out;
  if (label != OutcomeLabel::kFlaky && label != OutcomeLabel::kFaultRevealing) return out;
  const auto kind = label == OutcomeLabel::kFlaky ? FailureKind::kFlakyFailure
                                                  : FailureKind::kFaultTriggeringFailure;
  for (std::size_t i = 0; i < record.attempts.size(); ++i) {
    const auto& a = record.attempts[i];
    if (!is_failing(a.status)) continue;
    out.push_back({record.build_id, record.test_id, kind, static_cast<int>(i), a.duration,
                   a.status, a.tag_status});
  }
  return out;
}

}  // namespace flakesift
