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

// End-to-end experiments over a time-split corpus:
//
//   rq1  test-level vocabulary model, scored on holdout failures
//   rq2  failure-level vocabulary model
//   rq3  failure-level vocabulary + execution features
//
// plus the history-only baseline and false-positive forensics. Training
// reads only training builds; the reader is told "training" before and
// "scoring" after, so an AuditedReader can prove it.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flakesift/datasets.hpp"
#include "flakesift/metrics.hpp"
#include "flakesift/model.hpp"

namespace flakesift {

enum class Experiment { kRq1, kRq2, kRq3 };

inline std::string_view to_string(Experiment e) noexcept {
  switch (e) {
    case Experiment::kRq1: return "rq1";
    case Experiment::kRq2: return "rq2";
    case Experiment::kRq3: return "rq3";
  }
  return "?";
}

inline Experiment parse_experiment(std::string_view s) {
  if (s == "rq1") return Experiment::kRq1;
  if (s == "rq2") return Experiment::kRq2;
  if (s == "rq3") return Experiment::kRq3;
  throw Error("unknown experiment \"" + std::string(s) + "\" (expected rq1, rq2 or rq3)");
}

struct ExperimentConfig {
  int window = kDefaultWindow;
  double split_fraction = 0.8;
  TokenizerConfig tokenizer;
  ExecutionFeatureSet rq3_features = ExecutionFeatureSet::standard();
  bool tune = true;
  HyperGrid grid;
  int k = 1000;  // used when tune is off
  ForestParams forest;
  double threshold = 0.5;
  NegativeExclusion exclusion = NegativeExclusion::kTrainingRange;
  int max_attempts = kDefaultMaxAttempts;
};

struct SplitPlan {
  BuildRange train;
  BuildRange holdout;
  double fraction = 0.8;
  std::size_t train_builds = 0;
  std::size_t holdout_builds = 0;
};

/// The first floor(fraction * n) builds train, the rest are held out.
inline SplitPlan split_corpus(const CorpusReader& reader, double fraction = 0.8) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("split fraction must be in (0, 1)");
  const auto ids = reader.build_ids();
  if (ids.size() < 2) throw Error("split needs at least 2 builds, corpus has " + std::to_string(ids.size()));
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ids.size()) + 1e-9));
  if (cut == 0 || cut >= ids.size())
    throw Error("split fraction " + std::to_string(fraction) + " leaves an empty side for " +
                std::to_string(ids.size()) + " builds");
  SplitPlan p;
  p.fraction = fraction;
  p.train = {ids.front(), ids[cut - 1]};
  p.holdout = {ids[cut], ids.back()};
  p.train_builds = cut;
  p.holdout_builds = ids.size() - cut;
  return p;
}

struct Verdict {
  BuildId build_id = 0;
  std::string test_id;
  int attempt_index = 0;
  bool truth_flaky = false;
  bool predicted_flaky = false;
  double probability = 0.0;
  FlakeRate rate;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline ConfusionMatrix confusion_of(const std::vector<Verdict>& verdicts) {
  ConfusionMatrix cm;
  for (const auto& v : verdicts) cm.add(v.truth_flaky, v.predicted_flaky);
  return cm;
}

struct ExperimentResult {
  std::string id;  // rq1, rq2, rq3 or baseline
  SplitPlan split;
  int window = kDefaultWindow;
  MetricsReport metrics;
  std::vector<Verdict> verdicts;
  std::optional<FlakeModel> model;
  std::optional<GridResult> grid;
  Json training = Json::object();    // training set composition
  Json evaluation = Json::object();  // holdout set composition
};

namespace detail {

inline Json ledger_json(const TestLevelLedger& l) {
  return Json{{"level", "test"},
              {"positives", l.positives},
              {"negatives_fault_revealing", l.negatives_fault_revealing},
              {"negatives_passing", l.negatives_passing},
              {"excluded_flaky_elsewhere", l.excluded},
              {"anchor_build", l.anchor_build}};
}

inline Json ledger_json(const FailureLevelLedger& l) {
  return Json{{"level", "failure"},
              {"flaky_failures", l.flaky_failures},
              {"fault_triggering_failures", l.fault_triggering_failures},
              {"passing_executions", l.passing_executions},
              {"anchor_build", l.anchor_build}};
}

inline std::vector<Verdict> score(const FlakeModel& model, const SampleSet& eval) {
  const auto preds = model.predict(model.vectorize(eval));
  std::vector<Verdict> out;
  out.reserve(eval.samples.size());
  for (std::size_t i = 0; i < eval.samples.size(); ++i) {
    const auto& s = eval.samples[i];
    out.push_back({s.provenance.build_id, s.provenance.test_id, s.provenance.attempt_index, s.label != 0,
                   preds[i].flaky, preds[i].probability, s.rate});
  }
  return out;
}

}  // namespace detail

inline TrainConfig train_config(const ExperimentConfig& cfg, const ExecutionFeatureSet& exec) {
  TrainConfig t;
  t.tokenizer = cfg.tokenizer;
  t.execution = exec;
  t.k = cfg.k;
  t.forest = cfg.forest;
  t.threshold = cfg.threshold;
  t.tune = cfg.tune;
  t.grid = cfg.grid;
  return t;
}

/// Everything besides the model itself needed to rebuild its training
/// matrix from the corpus.
inline Json model_metadata(Experiment which, const SplitPlan& split, const ExperimentConfig& cfg) {
  return Json{{"experiment", to_string(which)},
              {"train_builds", {split.train.lo, split.train.hi}},
              {"split_fraction", split.fraction},
              {"window", cfg.window},
              {"max_attempts", cfg.max_attempts},
              {"negative_exclusion", cfg.exclusion == NegativeExclusion::kWholeCorpus ? "whole_corpus" : "training_range"}};
}

inline ExperimentResult run_experiment(const CorpusReader& reader, Experiment which,
                                       const ExperimentConfig& cfg = {}) {
  ExperimentResult res;
  res.id = std::string(to_string(which));
  res.window = cfg.window;
  res.split = split_corpus(reader, cfg.split_fraction);

  reader.mark_phase("training");
  SampleSet training;
  std::unordered_map<std::string, std::string> latest_source;
  if (which == Experiment::kRq1) {
    auto ds = assemble_test_level(reader, res.split.train, cfg.window, cfg.exclusion, cfg.max_attempts);
    res.training = detail::ledger_json(ds.ledger);
    training = std::move(ds.set);
    latest_source = std::move(ds.latest_source);
  } else {
    auto ds = assemble_failure_level(reader, res.split.train, FailureSetRole::kTraining, cfg.window,
                                     cfg.max_attempts);
    res.training = detail::ledger_json(ds.ledger);
    training = std::move(ds.set);
  }
  const auto exec = which == Experiment::kRq3 ? cfg.rq3_features : ExecutionFeatureSet{};
  auto trained = train_pipeline(training, train_config(cfg, exec));
  trained.model.metadata = model_metadata(which, res.split, cfg);
  res.grid = std::move(trained.grid);

  reader.mark_phase("scoring");
  auto eval = assemble_failure_level(reader, res.split.holdout, FailureSetRole::kEvaluation, cfg.window,
                                     cfg.max_attempts);
  res.evaluation = detail::ledger_json(eval.ledger);
  if (which == Experiment::kRq1) {
    // Score each failure with its test's training-time source; tests first
    // seen in the holdout keep their own source.
    SampleSet mapped;
    for (const auto& s : eval.set.samples) {
      auto copy = s;
      auto it = latest_source.find(s.provenance.test_id);
      copy.source = mapped.intern(it != latest_source.end() ? it->second : eval.set.sources[s.source]);
      mapped.samples.push_back(std::move(copy));
    }
    eval.set = std::move(mapped);
  }
  res.verdicts = detail::score(trained.model, eval.set);
  res.metrics = compute_metrics(confusion_of(res.verdicts));
  res.model = std::move(trained.model);
  return res;
}

/// Predicts flaky iff the test flaked at least once in the `window` builds
/// before the failing build.
inline ExperimentResult dummy_baseline(const CorpusReader& reader, const SplitPlan& split,
                                       int window = kDefaultWindow, int max_attempts = kDefaultMaxAttempts) {
  ExperimentResult res;
  res.id = "baseline";
  res.split = split;
  res.window = window;
  reader.mark_phase("scoring");
  const auto eval = assemble_failure_level(reader, split.holdout, FailureSetRole::kEvaluation, window, max_attempts);
  res.evaluation = detail::ledger_json(eval.ledger);
  for (const auto& s : eval.set.samples)
    res.verdicts.push_back({s.provenance.build_id, s.provenance.test_id, s.provenance.attempt_index, s.label != 0,
                            s.rate.positive(), s.rate.to_double(), s.rate});
  res.metrics = compute_metrics(confusion_of(res.verdicts));
  return res;
}

// ---------------------------------------------------------------------------
// Forensics

/// False positives are fault-triggering failures predicted flaky. They are
/// split by whether their test had flaked within the window before the
/// failure. Fractions are relative to all fault-triggering failures.
struct ForensicsBreakdown {
  std::size_t fault_triggering = 0;
  std::size_t false_positives = 0;
  std::size_t with_history = 0;
  std::size_t without_history = 0;

  std::optional<Rational> with_history_fraction() const { return of_total(with_history); }
  std::optional<Rational> without_history_fraction() const { return of_total(without_history); }
  bool empty() const noexcept { return false_positives == 0; }

 private:
  std::optional<Rational> of_total(std::size_t n) const {
    if (fault_triggering == 0) return std::nullopt;
    return Rational(static_cast<std::int64_t>(n), static_cast<std::int64_t>(fault_triggering));
  }
};

inline ForensicsBreakdown misclassification_forensics(const std::vector<Verdict>& verdicts) {
  ForensicsBreakdown b;
  for (const auto& v : verdicts) {
    if (v.truth_flaky) continue;
    ++b.fault_triggering;
    if (!v.predicted_flaky) continue;
    ++b.false_positives;
    ++(v.rate.positive() ? b.with_history : b.without_history);
  }
  return b;
}

/// Same partition, with history looked up in `index` instead of the rates
/// stored in the verdict log.
inline ForensicsBreakdown misclassification_forensics(const std::vector<Verdict>& verdicts,
                                                      const FlakeHistoryIndex& index, int window) {
  auto relabeled = verdicts;
  for (auto& v : relabeled) v.rate = index.flake_rate(v.test_id, v.build_id, window);
  return misclassification_forensics(relabeled);
}

inline Json forensics_to_json(const ForensicsBreakdown& b) {
  return Json{{"fault_triggering_failures", b.fault_triggering},
              {"false_positives", b.false_positives},
              {"with_history", {{"count", b.with_history}, {"of_fault_triggering", rational_to_json(b.with_history_fraction())}}},
              {"without_history",
               {{"count", b.without_history}, {"of_fault_triggering", rational_to_json(b.without_history_fraction())}}}};
}

// ---------------------------------------------------------------------------
// Report directory

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quoted field");
  return fields;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

inline std::string verdicts_csv(const std::vector<Verdict>& verdicts) {
  std::string out = "build_id,test_id,attempt_index,truth,verdict,probability,flake_rate\n";
  for (const auto& v : verdicts) {
    out += std::to_string(v.build_id) + ',' + detail::csv_field(v.test_id) + ',' + std::to_string(v.attempt_index) +
           ',' + (v.truth_flaky ? "flaky" : "not_flaky") + ',' + (v.predicted_flaky ? "flaky" : "not_flaky") + ',' +
           detail::format_double(v.probability) + ',' + std::to_string(v.rate.flaked) + '/' +
           std::to_string(v.rate.window) + '\n';
  }
  return out;
}

inline std::vector<Verdict> parse_verdicts_csv(std::istream& in) {
  std::vector<Verdict> out;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("verdicts: missing header");
  ++line_no;
  if (line != "build_id,test_id,attempt_index,truth,verdict,probability,flake_rate")
    throw ParseError(line_no, "verdicts: unexpected header");
  auto flag = [&](const std::string& s) {
    if (s == "flaky") return true;
    if (s == "not_flaky") return false;
    throw ParseError(line_no, "verdicts: expected flaky or not_flaky, got \"" + s + "\"");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line, line_no);
    if (f.size() != 7) throw ParseError(line_no, "verdicts: expected 7 fields");
    try {
      Verdict v;
      v.build_id = std::stoll(f[0]);
      v.test_id = f[1];
      v.attempt_index = std::stoi(f[2]);
      v.truth_flaky = flag(f[3]);
      v.predicted_flaky = flag(f[4]);
      v.probability = std::stod(f[5]);
      const auto slash = f[6].find('/');
      if (slash == std::string::npos) throw ParseError(line_no, "verdicts: flake_rate must be k/w");
      v.rate = {std::stoi(f[6].substr(0, slash)), std::stoi(f[6].substr(slash + 1))};
      out.push_back(std::move(v));
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "verdicts: malformed number");
    }
  }
  return out;
}

inline std::vector<Verdict> read_verdicts_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_verdicts_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

inline Json report_to_json(const ExperimentResult& r) {
  Json j{{"experiment", r.id},
         {"window", r.window},
         {"split",
          {{"fraction", r.split.fraction},
           {"train", {r.split.train.lo, r.split.train.hi}},
           {"holdout", {r.split.holdout.lo, r.split.holdout.hi}},
           {"train_builds", r.split.train_builds},
           {"holdout_builds", r.split.holdout_builds}}},
         {"metrics", metrics_to_json(r.metrics)},
         {"training", r.training},
         {"evaluation", r.evaluation},
         {"model", nullptr}};
  if (r.model) {
    const auto& m = *r.model;
    j["model"] = Json{{"n_trees", m.params.n_trees},
                      {"k", m.mask.k},
                      {"selected_tokens", m.mask.selected.size()},
                      {"max_depth", m.params.tree.max_depth},
                      {"seed", m.params.seed},
                      {"threshold", m.threshold},
                      {"vocabulary_size", m.vocabulary.size()},
                      {"vocabulary_hash", hex64(m.vocabulary.hash())},
                      {"execution_features", m.execution.str()}};
  }
  return j;
}

/// Writes report.json, confusion.csv, verdicts.csv, forensics.json and,
/// for tuned runs, grid.json. Contents depend only on the result.
inline void write_report_dir(const fs::path& dir, const ExperimentResult& r) {
  fs::create_directories(dir);
  detail::write_text(dir / "report.json", report_to_json(r).dump(2) + "\n");
  const auto& cm = r.metrics.confusion;
  detail::write_text(dir / "confusion.csv", "truth,predicted,count\nflaky,flaky," + std::to_string(cm.tp) +
                                                "\nflaky,not_flaky," + std::to_string(cm.fn) +
                                                "\nnot_flaky,flaky," + std::to_string(cm.fp) +
                                                "\nnot_flaky,not_flaky," + std::to_string(cm.tn) + "\n");
  detail::write_text(dir / "verdicts.csv", verdicts_csv(r.verdicts));
  detail::write_text(dir / "forensics.json", forensics_to_json(misclassification_forensics(r.verdicts)).dump(2) + "\n");
  if (r.grid) detail::write_text(dir / "grid.json", grid_to_json(*r.grid).dump(2) + "\n");
}

inline Json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

struct MetricDifference {
  std::string metric;
  std::optional<double> a, b;
};

/// Metrics (precision, recall, fpr, mcc) of two report.json documents that
/// differ by more than `tolerance`. Defined vs undefined always differs.
inline std::vector<MetricDifference> compare_reports(const Json& a, const Json& b, double tolerance) {
  if (!(tolerance >= 0)) throw Error("tolerance must be >= 0");
  std::vector<MetricDifference> out;
  for (const char* name : {"precision", "recall", "fpr", "mcc"}) {
    auto get = [&](const Json& r) -> std::optional<double> {
      const auto& v = r.at("metrics").at(name);
      if (v.is_null()) return std::nullopt;
      return v.at("value").get<double>();
    };
    const auto x = get(a), y = get(b);
    const bool differ = x.has_value() != y.has_value() || (x && std::fabs(*x - *y) > tolerance);
    if (differ) out.push_back({name, x, y});
  }
  return out;
}

/// Plain-text summary of a report.json document.
inline std::string render_report(const Json& r) {
  std::ostringstream out;
  const auto& m = r.at("metrics");
  auto pct = [](const Json& v) { return v.is_null() ? std::string("undefined") : v.at("percent").get<std::string>(); };
  out << "experiment  " << r.at("experiment").get<std::string>() << '\n';
  out << "train       " << r.at("split").at("train")[0] << ".." << r.at("split").at("train")[1] << '\n';
  out << "holdout     " << r.at("split").at("holdout")[0] << ".." << r.at("split").at("holdout")[1] << '\n';
  out << "precision   " << pct(m.at("precision")) << '\n';
  out << "recall      " << pct(m.at("recall")) << '\n';
  out << "mcc         " << (m.at("mcc").is_null() ? std::string("undefined") : m.at("mcc").at("display").get<std::string>())
      << '\n';
  out << "fpr         " << pct(m.at("fpr")) << '\n';
  const auto& c = m.at("confusion");
  out << "confusion   tp=" << c.at("tp") << " fn=" << c.at("fn") << " fp=" << c.at("fp") << " tn=" << c.at("tn") << '\n';
  return out.str();
}

}  // namespace flakesift
