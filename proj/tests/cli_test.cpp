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

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

using namespace flakesift;
using namespace flakesift::testing;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = flakesift::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// One JSONL file per build: S.t flakes in builds 2, 9, 15, 22, 30; S.u always passes.
fs::path history_corpus(const TempDir& dir) {
  const auto root = dir / "jsonl";
  fs::create_directories(root);
  for (BuildId b = 1; b <= 40; ++b) {
    const bool flaked = b == 2 || b == 9 || b == 15 || b == 22 || b == 30;
    std::string text = serialize_record(record(b, "S.t", flaked ? flaky_attempts(1) : std::vector{pass()})) + "\n" +
                       serialize_record(record(b, "S.u", {pass()})) + "\n";
    write_text(root / build_file_name(b), text);
  }
  return root;
}

fs::path adversarial_corpus(const TempDir& dir, std::uint64_t seed = 1) {
  const auto root = dir / ("adv" + std::to_string(seed));
  if (!fs::exists(root)) {
    EXPECT_EQ(invoke({"synth", "--profile", "adversarial", "--builds", "80", "--tests", "250", "--seed",
                   std::to_string(seed), "--out", root.string()})
                  .code,
              0);
  }
  return root;
}

std::vector<std::string> fast_flags() { return {"--no-tune", "--n-trees", "20", "--k", "100", "--seed", "3"}; }

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const auto r = invoke({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("evaluate"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 1);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(invoke({"--help"}).code, 0); }

TEST(Cli, FlakeRatePrintsDecimalAndFraction) {
  TempDir dir;
  const auto c = history_corpus(dir);
  const auto r = invoke({"flake-rate", "--corpus", c.string(), "--test", "S.t", "--build", "36", "--window", "35"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.142857 5/35\n");
  EXPECT_EQ(invoke({"flake-rate", "--corpus", c.string(), "--test", "S.u", "--build", "36"}).out, "0.000000 0/35\n");
  EXPECT_EQ(invoke({"flake-rate", "--corpus", c.string(), "--test", "S.t", "--build", "99"}).code, 2);
  EXPECT_EQ(invoke({"flake-rate", "--corpus", c.string(), "--test", "S.t", "--build", "10", "--window", "0"}).code, 2);
}

TEST(Cli, IngestThenStats) {
  TempDir dir;
  const auto src = history_corpus(dir);
  const auto store = dir / "store";
  auto r = invoke({"ingest", src.string(), "--corpus", store.string(), "--tester", "linux"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(r.out)["record_count"], 80);
  r = invoke({"stats", "--corpus", store.string(), "--history-csv", (dir / "h.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["tests"]["flaky"], 1);
  EXPECT_EQ(j["failures"]["flaky"], 5);
  EXPECT_TRUE(fs::exists(dir / "h.csv"));
  r = invoke({"scan-window", "--corpus", store.string(), "--windows", "1,10,35"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "window,zero_rate,points");
}

TEST(Cli, IngestRejectsBadRecords) {
  TempDir dir;
  write_text(dir / "bad.jsonl", "{\"build_id\": 1}\n");
  const auto r = invoke({"ingest", (dir / "bad.jsonl").string(), "--corpus", (dir / "s").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
}

TEST(Cli, EvaluateWritesReportDirectory) {
  TempDir dir;
  const auto c = adversarial_corpus(dir);
  const auto out = dir / "r1";
  const auto r = invoke(concat({"evaluate", "rq1", "--corpus", c.string(), "--out", out.string()}, fast_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"report.json", "confusion.csv", "verdicts.csv", "forensics.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_NE(r.out.find("mcc"), std::string::npos);
  const auto shown = invoke({"report", out.string()});
  EXPECT_EQ(shown.code, 0);
  EXPECT_NE(shown.out.find("false positives"), std::string::npos);
  EXPECT_EQ(Json::parse(invoke({"report", out.string(), "--json"}).out)["report"]["experiment"], "rq1");
}

TEST(Cli, EvaluateRequiresCorpus) {
  TempDir dir;
  const char* saved = std::getenv(flakesift::cli::kCorpusEnv);
  ::unsetenv(flakesift::cli::kCorpusEnv);
  EXPECT_EQ(invoke({"evaluate", "rq2", "--out", (dir / "r").string()}).code, 2);
  if (saved) ::setenv(flakesift::cli::kCorpusEnv, saved, 1);
}

TEST(Cli, ReportsAreByteIdentical) {
  TempDir dir;
  const auto c = adversarial_corpus(dir);
  for (const char* exp : {"rq2", "rq3"}) {
    const auto a = dir / (std::string(exp) + "a"), b = dir / (std::string(exp) + "b");
    ASSERT_EQ(invoke(concat({"evaluate", exp, "--corpus", c.string(), "--out", a.string()}, fast_flags())).code, 0);
    ASSERT_EQ(invoke(concat({"evaluate", exp, "--corpus", c.string(), "--out", b.string(), "--threads", "3"}, fast_flags())).code, 0);
    for (const char* f : {"report.json", "confusion.csv", "verdicts.csv", "forensics.json"})
      EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(b / f)) << exp << " " << f;
  }
  const auto b1 = dir / "b1", b2 = dir / "b2";
  ASSERT_EQ(invoke({"baseline", "--corpus", c.string(), "--out", b1.string()}).code, 0);
  ASSERT_EQ(invoke({"baseline", "--corpus", c.string(), "--out", b2.string()}).code, 0);
  EXPECT_EQ(read_file_bytes(b1 / "verdicts.csv"), read_file_bytes(b2 / "verdicts.csv"));
}

TEST(Cli, CompareExitsNonzeroOnlyBeyondTolerance) {
  TempDir dir;
  const auto c = adversarial_corpus(dir);
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(invoke(concat({"evaluate", "rq2", "--corpus", c.string(), "--out", a.string()}, fast_flags())).code, 0);
  ASSERT_EQ(invoke({"baseline", "--corpus", c.string(), "--out", b.string()}).code, 0);
  EXPECT_EQ(invoke({"report", "--compare", a.string(), a.string()}).code, 0);
  const auto diff = invoke({"report", "--compare", a.string(), b.string()});
  EXPECT_EQ(diff.code, 3);
  EXPECT_FALSE(Json::parse(diff.out)["differences"].empty());
  EXPECT_EQ(invoke({"report", "--compare", a.string(), b.string(), "--tolerance", "2"}).code, 0);
  EXPECT_EQ(invoke({"report", "--compare", a.string()}).code, 1);
}

TEST(Cli, CorpusFromEnvironment) {
  TempDir dir;
  const auto c = history_corpus(dir);
  ::setenv(flakesift::cli::kCorpusEnv, c.string().c_str(), 1);
  const auto r = invoke({"flake-rate", "--test", "S.t", "--build", "36"});
  ::unsetenv(flakesift::cli::kCorpusEnv);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.142857 5/35\n");
}

TEST(Cli, FlagsOverrideConfigFile) {
  TempDir dir;
  const auto c = history_corpus(dir);
  write_text(dir / "cfg.json", Json{{"corpus", c.string()}, {"window", 10}}.dump());
  const auto cfg = (dir / "cfg.json").string();
  EXPECT_EQ(invoke({"flake-rate", "--config", cfg, "--test", "S.t", "--build", "36"}).out, "0.100000 1/10\n");
  EXPECT_EQ(invoke({"flake-rate", "--config", cfg, "--window", "35", "--test", "S.t", "--build", "36"}).out,
            "0.142857 5/35\n");
  write_text(dir / "typo.json", Json{{"windwo", 10}}.dump());
  EXPECT_EQ(invoke({"flake-rate", "--config", (dir / "typo.json").string(), "--test", "S.t", "--build", "36"}).code, 2);
}

TEST(Cli, TrainSavesLoadableModel) {
  TempDir dir;
  const auto c = adversarial_corpus(dir);
  const auto model = dir / "m.json";
  const auto r = invoke(concat({"train", "rq3", "--corpus", c.string(), "--model-out", model.string(), "--export-features",
                             (dir / "x").string()},
                            fast_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = model_from_json(read_json_file(model));
  EXPECT_EQ(m.forest.trees().size(), 20u);
  EXPECT_EQ(m.execution, ExecutionFeatureSet::standard());
  EXPECT_FALSE(fs::is_empty(dir / "x"));
}

TEST(Cli, SynthVerify) {
  TempDir dir;
  const auto c = adversarial_corpus(dir, 4);
  EXPECT_EQ(invoke({"synth", "--verify", c.string()}).code, 0);
  auto text = read_text(c / build_file_name(1));
  text.replace(text.find("\"PASS\""), 6, "\"SKIP\"");
  write_text(c / build_file_name(1), text);
  const auto r = invoke({"synth", "--verify", c.string()});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
  EXPECT_EQ(invoke({"synth", "--profile", "nope", "--out", (dir / "n").string()}).code, 1);
}

TEST(Cli, Rq3BeatsRq2OnDefaultProfile) {
  TempDir dir;
  const auto c = dir / "default";
  // Default generator settings at reduced scale (see README).
  ASSERT_EQ(invoke({"synth", "--profile", "default", "--builds", "150", "--tests", "600", "--out", c.string()}).code, 0);
  const auto flags = std::vector<std::string>{"--no-tune", "--n-trees", "50", "--k", "200", "--seed", "1"};
  ASSERT_EQ(invoke(concat({"evaluate", "rq2", "--corpus", c.string(), "--out", (dir / "rq2").string()}, flags)).code, 0);
  ASSERT_EQ(invoke(concat({"evaluate", "rq3", "--corpus", c.string(), "--out", (dir / "rq3").string()}, flags)).code, 0);
  const auto rq2 = read_json_file(dir / "rq2" / "report.json")["metrics"]["mcc"];
  const auto rq3 = read_json_file(dir / "rq3" / "report.json")["metrics"]["mcc"];
  ASSERT_FALSE(rq2.is_null());
  ASSERT_FALSE(rq3.is_null());
  EXPECT_GT(rq3["value"].get<double>(), rq2["value"].get<double>());
}
