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

#include "test_support.hpp"

using namespace flakesift;
using namespace flakesift::testing;

namespace {

std::vector<RunAttempt> seq(std::string_view pattern) {
  std::vector<RunAttempt> out;
  for (char c : pattern) {
    switch (c) {
      case 'P': out.push_back(pass()); break;
      case 'F': out.push_back(fail()); break;
      case 'S': out.push_back(skip()); break;
      case 'C': out.push_back({RunStatus::kCrash, RunTagStatus::kCrash, 1.0}); break;
      case 'A': out.push_back({RunStatus::kAbort, RunTagStatus::kUnknown, 1.0}); break;
    }
  }
  return out;
}

}  // namespace

TEST(LabelOutcome, SinglePass) { EXPECT_EQ(label_outcome(seq("P")), OutcomeLabel::kPass); }

TEST(LabelOutcome, FailThenPassIsFlaky) { EXPECT_EQ(label_outcome(seq("FP")), OutcomeLabel::kFlaky); }

TEST(LabelOutcome, TwoFailuresThenPassIsFlaky) { EXPECT_EQ(label_outcome(seq("FFP")), OutcomeLabel::kFlaky); }

TEST(LabelOutcome, SixFailuresAreFaultRevealing) {
  EXPECT_EQ(label_outcome(seq("FFFFFF"), 6), OutcomeLabel::kFaultRevealing);
}

TEST(LabelOutcome, FirstSkipIsSkipped) { EXPECT_EQ(label_outcome(seq("S")), OutcomeLabel::kSkipped); }

TEST(LabelOutcome, CrashAndAbortCountAsFailing) {
  EXPECT_EQ(label_outcome(seq("CAP")), OutcomeLabel::kFlaky);
  EXPECT_EQ(label_outcome(seq("CAFCAF")), OutcomeLabel::kFaultRevealing);
}

TEST(LabelOutcome, TruncatedRerunsHaveTheirOwnError) {
  EXPECT_THROW(label_outcome(seq("FFF")), TruncatedRerunsError);
  // Still a validation error for callers that do not care which.
  EXPECT_THROW(label_outcome(seq("F")), ValidationError);
}

TEST(LabelOutcome, RejectsMalformedSequences) {
  EXPECT_THROW(label_outcome(seq("")), ValidationError);
  EXPECT_THROW(label_outcome(seq("PF")), ValidationError);
  EXPECT_THROW(label_outcome(seq("FPF")), ValidationError);
  EXPECT_THROW(label_outcome(seq("FSP")), ValidationError);
  EXPECT_THROW(label_outcome(seq("SP")), ValidationError);
  EXPECT_THROW(label_outcome(seq("FFFFFFF")), ValidationError);
  EXPECT_THROW(label_outcome(seq("P"), 0), ValidationError);
}

TEST(LabelOutcome, MaxAttemptsIsConfigurable) {
  EXPECT_EQ(label_outcome(seq("FFFFF"), 5), OutcomeLabel::kFaultRevealing);
  EXPECT_THROW(label_outcome(seq("FFFFFF"), 5), ValidationError);
  EXPECT_EQ(label_outcome(seq("F"), 1), OutcomeLabel::kFaultRevealing);
}

// Every {P,F} sequence of length 1..6 against a table written out by hand:
// the twelve well-formed sequences below, everything else has an attempt
// after a PASS.
TEST(LabelOutcome, ExhaustiveTruthTable) {
  const std::map<std::string, std::string> table{
      {"P", "PASS"},          {"FP", "FLAKY"},        {"FFP", "FLAKY"},
      {"FFFP", "FLAKY"},      {"FFFFP", "FLAKY"},     {"FFFFFP", "FLAKY"},
      {"FFFFFF", "FAULT_REVEALING"},
      {"F", "truncated"},     {"FF", "truncated"},    {"FFF", "truncated"},
      {"FFFF", "truncated"},  {"FFFFF", "truncated"},
  };
  int cases = 0;
  for (int len = 1; len <= 6; ++len)
    for (int bits = 0; bits < (1 << len); ++bits) {
      std::string p;
      for (int i = 0; i < len; ++i) p += (bits >> (len - 1 - i)) & 1 ? 'F' : 'P';
      ++cases;
      std::string got;
      try {
        got = std::string(to_string(label_outcome(seq(p), 6)));
      } catch (const TruncatedRerunsError&) {
        got = "truncated";
      } catch (const ValidationError&) {
        got = "invalid";
      }
      auto it = table.find(p);
      EXPECT_EQ(got, it == table.end() ? "invalid" : it->second) << p;
    }
  EXPECT_EQ(cases, 126);
}

TEST(LabelOutcome, IsPure) {
  const auto s = seq("FCP");
  const auto first = label_outcome(s);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(label_outcome(s), first);
}

TEST(ExtractFailures, FlakyRecordYieldsOneFailure) {
  const auto r = record(7, "S.t", seq("FP"));
  const auto f = extract_failures(r);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].kind, FailureKind::kFlakyFailure);
  EXPECT_EQ(f[0].attempt_index, 0);
  EXPECT_EQ(f[0].build_id, 7);
}

TEST(ExtractFailures, FaultRecordYieldsSixFailures) {
  const auto f = extract_failures(record(1, "S.t", seq("FFFFFF")));
  ASSERT_EQ(f.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(f[static_cast<std::size_t>(i)].kind, FailureKind::kFaultTriggeringFailure);
    EXPECT_EQ(f[static_cast<std::size_t>(i)].attempt_index, i);
  }
}

TEST(ExtractFailures, PassAndSkipYieldNothing) {
  EXPECT_TRUE(extract_failures(record(1, "S.t", seq("P"))).empty());
  EXPECT_TRUE(extract_failures(record(1, "S.t", seq("S"))).empty());
}

TEST(ExtractFailures, CountMatchesFailingAttempts) {
  for (const char* p : {"FP", "FFP", "CAFP", "FFFFFP", "FFFFFF", "AAAAAA"}) {
    const auto r = record(1, "S.t", seq(p));
    const auto label = label_outcome(r.attempts);
    std::size_t failing = 0;
    for (const auto& a : r.attempts) failing += is_failing(a.status);
    const auto f = extract_failures(r);
    EXPECT_EQ(f.size(), failing) << p;
    for (const auto& x : f) {
      EXPECT_TRUE(is_failing(x.status));
      EXPECT_EQ(x.kind == FailureKind::kFlakyFailure, label == OutcomeLabel::kFlaky);
    }
  }
}

TEST(ValidateRecord, NamesTestAndBuild) {
  auto r = record(42, "Suite.broken", seq("PF"));
  try {
    validate_record(r);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("Suite.broken"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
}

TEST(ValidateRecord, RejectsNegativeDuration) {
  auto r = record(1, "S.t", {{RunStatus::kPass, RunTagStatus::kPass, -1.0}});
  EXPECT_THROW(validate_record(r), ValidationError);
}

TEST(Enums, RoundTripEveryValue) {
  for (auto s : kAllRunStatuses) EXPECT_EQ(parse_run_status(to_string(s)), s);
  for (auto t : kAllRunTagStatuses) EXPECT_EQ(parse_run_tag_status(to_string(t)), t);
  EXPECT_FALSE(parse_run_status("MAYBE"));
  EXPECT_FALSE(parse_run_tag_status("pass"));
  EXPECT_EQ(kAllRunTagStatuses.size(), 10u);
}
