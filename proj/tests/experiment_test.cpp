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

#include <sstream>

#include "test_support.hpp"

using namespace flakesift;
using namespace flakesift::testing;

namespace {

ExperimentConfig quick_config(std::uint64_t seed = 1) {
  ExperimentConfig c;
  c.tune = false;
  c.k = 100;
  c.forest.n_trees = 20;
  c.forest.seed = seed;
  return c;
}

SynthConfig small_adversarial(std::uint64_t seed) {
  auto c = SynthConfig::profile("adversarial");
  c.n_builds = 60;
  c.n_tests = 200;
  c.seed = seed;
  return c;
}

MemoryCorpus builds_only(int n) {
  MemoryCorpus m;
  for (BuildId b = 1; b <= n; ++b) m.add(record(b, "S.a", {pass()}));
  return m;
}

}  // namespace

TEST(Split, TenBuilds) {
  const auto p = split_corpus(builds_only(10), 0.8);
  EXPECT_EQ(p.train.lo, 1);
  EXPECT_EQ(p.train.hi, 8);
  EXPECT_EQ(p.holdout.lo, 9);
  EXPECT_EQ(p.holdout.hi, 10);
}

TEST(Split, TenThousandBuilds) {
  const auto p = split_corpus(builds_only(10000), 0.8);
  EXPECT_EQ(p.train.hi, 8000);
  EXPECT_EQ(p.holdout.lo, 8001);
  EXPECT_EQ(p.holdout.hi, 10000);
  EXPECT_EQ(p.train_builds, 8000u);
}

TEST(Split, RejectsDegenerateInputs) {
  EXPECT_THROW(split_corpus(builds_only(1)), Error);
  EXPECT_THROW(split_corpus(builds_only(10), 0.0), Error);
  EXPECT_THROW(split_corpus(builds_only(10), 1.0), Error);
  EXPECT_THROW(split_corpus(builds_only(3), 0.1), Error);
}

TEST(Split, RangesAreDisjointAndCover) {
  for (int n = 2; n <= 60; ++n)
    for (double f : {0.1, 0.29, 0.5, 0.8, 0.95}) {
      SplitPlan p;
      try {
        p = split_corpus(builds_only(n), f);
      } catch (const Error&) {
        continue;
      }
      EXPECT_LT(p.train.hi, p.holdout.lo);
      EXPECT_EQ(p.train_builds + p.holdout_builds, static_cast<std::size_t>(n));
      EXPECT_EQ(p.train_builds, static_cast<std::size_t>(std::floor(f * n + 1e-9)));
    }
}

TEST(Experiment, NoHoldoutBuildIsReadBeforeScoring) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(3)));
  for (auto which : {Experiment::kRq1, Experiment::kRq2, Experiment::kRq3}) {
    AuditedReader audited(m);
    auto cfg = quick_config();
    cfg.tune = true;
    cfg.grid.n_trees = {5};
    cfg.grid.k = {20, 50};
    const auto res = run_experiment(audited, which, cfg);
    EXPECT_TRUE(audited.violations("training", res.split.train).empty()) << to_string(which);
    EXPECT_EQ(audited.phases(), (std::vector<std::string>{"training", "scoring"}));
    for (const auto& e : audited.events())
      if (res.split.holdout.contains(e.build_id)) { EXPECT_EQ(e.phase, "scoring"); }
    ASSERT_TRUE(res.grid);
    for (const auto& f : res.grid->folds) EXPECT_GT(f.validate.lo, f.train_cut);
  }
}

TEST(Experiment, WholeCorpusExclusionReadsHoldoutDuringTraining) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(3)));
  AuditedReader audited(m);
  auto cfg = quick_config();
  cfg.exclusion = NegativeExclusion::kWholeCorpus;
  const auto res = run_experiment(audited, Experiment::kRq1, cfg);
  EXPECT_FALSE(audited.violations("training", res.split.train).empty());
}

TEST(Experiment, VerdictsCoverEveryHoldoutFailure) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(4)));
  const auto res = run_experiment(m, Experiment::kRq2, quick_config());
  std::size_t failures = 0;
  for (auto b : m.build_ids_in(res.split.holdout))
    for (const auto& r : m.read_build(b)) failures += extract_failures(r).size();
  EXPECT_EQ(res.verdicts.size(), failures);
  EXPECT_EQ(res.metrics.confusion.total(), failures);
  EXPECT_EQ(res.metrics.confusion, confusion_of(res.verdicts));
  for (const auto& v : res.verdicts) EXPECT_EQ(v.predicted_flaky, v.probability >= 0.5);
}

TEST(Experiment, Rq3ModelCarriesExecutionColumns) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(5)));
  const auto rq3 = run_experiment(m, Experiment::kRq3, quick_config());
  const auto rq2 = run_experiment(m, Experiment::kRq2, quick_config());
  EXPECT_EQ(rq3.model->execution, ExecutionFeatureSet::standard());
  EXPECT_FALSE(rq2.model->execution.any());
  EXPECT_EQ(rq3.model->forest.n_features(), rq3.model->mask.selected.size() + 2);
}

TEST(Experiment, PlantedCorpusRq1Separates) {
  const auto m = to_memory_corpus(generate_corpus(SynthConfig::profile("planted")));
  const auto res = run_experiment(m, Experiment::kRq1, quick_config());
  ASSERT_TRUE(res.metrics.mcc);
  EXPECT_GT(res.metrics.mcc->value(), 0.9);
  ASSERT_TRUE(res.metrics.fpr);
  EXPECT_LT(res.metrics.fpr->to_double(), 0.1);
}

TEST(Baseline, PerfectlySeparableHistory) {
  MemoryCorpus m;
  for (BuildId b = 1; b <= 20; ++b) {
    m.add(record(b, "S.flaky", flaky_attempts(1)));
    m.add(record(b, "S.fault", b % 5 == 0 ? fault_attempts() : std::vector{pass()}));
  }
  const auto res = dummy_baseline(m, split_corpus(m, 0.5));
  EXPECT_EQ(res.metrics.precision, Rational(1, 1));
  EXPECT_EQ(res.metrics.recall, Rational(1, 1));
}

TEST(Baseline, RecallIsFractionWithHistory) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto m = to_memory_corpus(generate_corpus(small_adversarial(seed)));
    const auto split = split_corpus(m, 0.8);
    const auto res = dummy_baseline(m, split, 35);
    // Brute force: for each holdout flaky failure, scan the 35 builds before it.
    const auto all = read_all(m);
    std::int64_t flaky = 0, with_history = 0;
    for (const auto& r : all) {
      if (!split.holdout.contains(r.build_id) || label_outcome(r.attempts) != OutcomeLabel::kFlaky) continue;
      bool history = false;
      for (const auto& p : all)
        if (p.test_id == r.test_id && p.build_id >= r.build_id - 35 && p.build_id < r.build_id &&
            label_outcome(p.attempts) == OutcomeLabel::kFlaky)
          history = true;
      const auto n = static_cast<std::int64_t>(extract_failures(r).size());
      flaky += n;
      with_history += history ? n : 0;
    }
    ASSERT_GT(flaky, 0);
    EXPECT_EQ(res.metrics.recall, Rational(with_history, flaky)) << "seed " << seed;
  }
}

TEST(Baseline, IsAPureFunctionOfHistory) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(2)));
  const auto split = split_corpus(m);
  EXPECT_EQ(dummy_baseline(m, split).verdicts, dummy_baseline(m, split).verdicts);
  AuditedReader audited(m);
  dummy_baseline(audited, split);
  EXPECT_EQ(audited.phases(), (std::vector<std::string>{"scoring"}));
}

TEST(Forensics, NoFalsePositivesIsEmpty) {
  std::vector<Verdict> v{{1, "a", 0, true, true, 0.9, {2, 35}}, {1, "b", 0, false, false, 0.1, {0, 35}}};
  const auto b = misclassification_forensics(v);
  EXPECT_TRUE(b.empty());
  EXPECT_EQ(b.fault_triggering, 1u);
}

TEST(Forensics, PartitionsByHistory) {
  std::vector<Verdict> v;
  for (int i = 0; i < 3; ++i) v.push_back({10, "h" + std::to_string(i), 0, false, true, 0.8, {1, 35}});
  for (int i = 0; i < 2; ++i) v.push_back({10, "n" + std::to_string(i), 0, false, true, 0.8, {0, 35}});
  for (int i = 0; i < 5; ++i) v.push_back({10, "ok" + std::to_string(i), 0, false, false, 0.1, {4, 35}});
  const auto b = misclassification_forensics(v);
  EXPECT_EQ(b.false_positives, 5u);
  EXPECT_EQ(b.with_history, 3u);
  EXPECT_EQ(b.without_history, 2u);
  EXPECT_EQ(b.with_history_fraction(), Rational(3, 10));
}

TEST(Forensics, MatchesLedgerHistory) {
  const auto corpus = generate_corpus(small_adversarial(6));
  const auto m = to_memory_corpus(corpus);
  const auto res = run_experiment(m, Experiment::kRq1, quick_config());
  const auto b = misclassification_forensics(res.verdicts);

  std::map<std::string, std::vector<BuildId>> flakes;
  for (const auto& e : corpus.ledger.events)
    if (e.label == OutcomeLabel::kFlaky) flakes[e.test_id].push_back(e.build_id);
  std::size_t with = 0, without = 0;
  for (const auto& v : res.verdicts) {
    if (v.truth_flaky || !v.predicted_flaky) continue;
    bool history = false;
    for (auto x : flakes[v.test_id]) history |= x >= v.build_id - 35 && x < v.build_id;
    ++(history ? with : without);
  }
  EXPECT_EQ(b.with_history, with);
  EXPECT_EQ(b.without_history, without);
  const auto idx = FlakeHistoryIndex::from_records(read_all(m));
  const auto again = misclassification_forensics(res.verdicts, idx, 35);
  EXPECT_EQ(again.with_history, with);
}

TEST(VerdictsCsv, RoundTrip) {
  std::vector<Verdict> v{{7, "Suite.plain", 0, true, false, 0.1234567890123, {3, 35}},
                         {8, "Suite.with,comma", 5, false, true, 1.0 / 3.0, {0, 35}},
                         {9, "Suite.\"quoted\"", 2, false, false, 0.0, {35, 35}}};
  std::istringstream in(verdicts_csv(v));
  EXPECT_EQ(parse_verdicts_csv(in), v);
}

TEST(VerdictsCsv, RejectsMalformedInput) {
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(parse_verdicts_csv(bad_header), ParseError);
  std::istringstream bad_flag("build_id,test_id,attempt_index,truth,verdict,probability,flake_rate\n1,t,0,maybe,flaky,0.5,1/35\n");
  EXPECT_THROW(parse_verdicts_csv(bad_flag), ParseError);
}

TEST(Reports, CompareHonoursTolerance) {
  auto report = [](ConfusionMatrix cm) {
    ExperimentResult r;
    r.id = "rq2";
    r.metrics = compute_metrics(cm);
    return report_to_json(r);
  };
  const auto a = report({90, 90, 10, 10});
  const auto b = report({91, 90, 10, 9});
  EXPECT_TRUE(compare_reports(a, a, 0).empty());
  EXPECT_FALSE(compare_reports(a, b, 1e-6).empty());
  EXPECT_TRUE(compare_reports(a, b, 0.05).empty());
  EXPECT_EQ(compare_reports(a, report({0, 5, 0, 0}), 1.0).size(), 3u);  // precision, recall, mcc undefined
}

TEST(Reports, DirectoryHasAllFiles) {
  TempDir dir;
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(7)));
  const auto res = run_experiment(m, Experiment::kRq2, quick_config());
  write_report_dir(dir / "r", res);
  for (const char* f : {"report.json", "confusion.csv", "verdicts.csv", "forensics.json"})
    EXPECT_TRUE(fs::exists(dir / "r" / f)) << f;
  EXPECT_EQ(read_verdicts_csv(dir / "r" / "verdicts.csv"), res.verdicts);
  const auto j = read_json_file(dir / "r" / "report.json");
  EXPECT_EQ(confusion_from_json(j["metrics"]["confusion"]), res.metrics.confusion);
  EXPECT_NE(render_report(j).find("precision"), std::string::npos);
}

TEST(Model, JsonRoundTripPredictsIdentically) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(8)));
  const auto res = run_experiment(m, Experiment::kRq3, quick_config());
  const auto text = model_to_json(*res.model).dump();
  const auto back = model_from_json(Json::parse(text));
  EXPECT_EQ(model_to_json(back).dump(), text);
  EXPECT_EQ(back.forest, res.model->forest);
  const auto eval = assemble_failure_level(m, res.split.holdout, FailureSetRole::kEvaluation);
  const auto a = res.model->predict(res.model->vectorize(eval.set));
  const auto b = back.predict(back.vectorize(eval.set));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].probability, b[i].probability);
}

TEST(Model, MetadataRebuildsTrainingMatrix) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(9)));
  const auto cfg = quick_config();
  const auto res = run_experiment(m, Experiment::kRq2, cfg);
  const auto& meta = res.model->metadata;
  const BuildRange train{meta["train_builds"][0].get<BuildId>(), meta["train_builds"][1].get<BuildId>()};
  const auto ds = assemble_failure_level(m, train, FailureSetRole::kTraining, meta["window"].get<int>());
  const auto rebuilt = train_pipeline(ds.set, train_config(cfg, res.model->execution));
  EXPECT_EQ(rebuilt.model.forest, res.model->forest);
}

TEST(Model, CorruptFilesAreRejected) {
  const auto m = to_memory_corpus(generate_corpus(small_adversarial(10)));
  const auto res = run_experiment(m, Experiment::kRq2, quick_config());
  auto j = model_to_json(*res.model);
  auto bad_hash = j;
  bad_hash["vocabulary_hash"] = "0000000000000000";
  EXPECT_THROW(model_from_json(bad_hash), ValidationError);
  auto bad_mask = j;
  bad_mask["mask"]["selected"].push_back(1u << 30);
  EXPECT_THROW(model_from_json(bad_mask), ValidationError);
  auto missing = j;
  missing.erase("trees");
  EXPECT_THROW(model_from_json(missing), ParseError);
  EXPECT_THROW(res.model->design(FeatureMatrix{}), Error);
}
