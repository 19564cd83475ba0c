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

// The flakesift command line. run_cli is the whole program minus process
// setup, so tests can drive it in-process.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 a check did not pass (report --compare, synth --verify).

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flakesift/flakesift.hpp"

namespace flakesift::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitCheckFailed = 3;
inline constexpr const char* kCorpusEnv = "FLAKESIFT_CORPUS";

namespace detail {

/// read_all over a fetcher, for open_corpus.
inline std::vector<TestExecutionRecord> fetch_all(const ResultFetcher& f) {
  std::vector<TestExecutionRecord> out;
  for (auto b : f.available_builds()) {
    auto recs = f.fetch_build(b);
    std::move(recs.begin(), recs.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace detail

/// Opens a store directory (manifest.json) or, failing that, loads every
/// *.jsonl / *.jsonl.gz file of a plain directory into memory.
inline std::unique_ptr<CorpusReader> open_corpus(const std::string& path, int max_attempts = kDefaultMaxAttempts) {
  if (path.empty()) throw Error(std::string("no corpus given (use --corpus or set ") + kCorpusEnv + ")");
  if (fs::exists(fs::path(path) / "manifest.json")) return std::make_unique<CorpusStore>(CorpusStore::open(path));
  if (!fs::is_directory(path)) throw Error("corpus " + path + " is not a directory");
  const auto files = list_record_files(path);
  if (files.empty()) throw Error("corpus " + path + " has neither manifest.json nor record files");
  return std::make_unique<MemoryCorpus>(detail::fetch_all(FileFetcher(files, max_attempts)));
}

namespace detail {

/// Experiment flags. Values given on the command line override the config
/// file, which overrides the built-in defaults.
struct ExperimentFlags {
  std::string config;
  std::string corpus;
  std::optional<int> window;
  std::optional<double> split_fraction;
  std::optional<std::string> execution_features;
  bool no_camel_split = false;
  bool no_tune = false;
  std::vector<int> grid_trees, grid_k, grid_depth;
  std::optional<int> folds;
  std::optional<int> n_trees, k, max_depth;
  std::optional<double> threshold;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> negative_exclusion;
  std::optional<int> max_attempts;

  void add_to(CLI::App& app, bool model_flags) {
    app.add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--corpus", corpus, "store directory or directory of JSONL files")->envname(kCorpusEnv);
    app.add_option("--window", window, "flake-rate window in builds (default 35)");
    app.add_option("--split-fraction", split_fraction, "share of builds used for training (default 0.8)");
    app.add_option("--max-attempts", max_attempts, "initial run plus reruns (default 6)");
    if (!model_flags) return;
    app.add_option("--execution-features", execution_features,
                   "rq3 feature set: duration,flake_rate,status,tag_status or none (default duration,flake_rate)");
    app.add_flag("--no-camel-split", no_camel_split, "do not split identifiers on case changes");
    app.add_flag("--no-tune", no_tune, "skip grid search; use --n-trees, --k, --max-depth");
    app.add_option("--grid-trees", grid_trees, "grid candidates for the number of trees")->delimiter(',');
    app.add_option("--grid-k", grid_k, "grid candidates for k (selected tokens)")->delimiter(',');
    app.add_option("--grid-depth", grid_depth, "grid candidates for max depth (0 = unlimited)")->delimiter(',');
    app.add_option("--folds", folds, "forward-chaining folds (default 3)");
    app.add_option("--n-trees", n_trees, "trees when not tuning (default 100)");
    app.add_option("--k", k, "selected tokens when not tuning (default 1000)");
    app.add_option("--max-depth", max_depth, "tree depth when not tuning, 0 = unlimited");
    app.add_option("--threshold", threshold, "probability at or above which a failure is flaky (default 0.5)");
    app.add_option("--seed", seed, "forest seed (default 0)");
    app.add_option("--threads", threads, "worker threads, 0 = all cores");
    app.add_option("--negative-exclusion", negative_exclusion, "training_range (default) or whole_corpus");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config.empty()) c = run_config_from_json(read_json_file(config));
    if (!corpus.empty()) c.corpus = corpus;
    auto& e = c.exp;
    if (window) e.window = *window;
    if (split_fraction) e.split_fraction = *split_fraction;
    if (execution_features) e.rq3_features = ExecutionFeatureSet::parse(*execution_features);
    if (no_camel_split) e.tokenizer.camel_split = false;
    if (no_tune) e.tune = false;
    if (!grid_trees.empty()) e.grid.n_trees = grid_trees;
    if (!grid_k.empty()) e.grid.k = grid_k;
    if (!grid_depth.empty()) e.grid.max_depth = grid_depth;
    if (folds) e.grid.folds = *folds;
    if (n_trees) e.forest.n_trees = *n_trees;
    if (k) e.k = *k;
    if (max_depth) e.forest.tree.max_depth = *max_depth;
    if (threshold) e.threshold = *threshold;
    if (seed) e.forest.seed = *seed;
    if (threads) e.forest.threads = *threads;
    if (negative_exclusion) e.exclusion = parse_negative_exclusion(*negative_exclusion);
    if (max_attempts) e.max_attempts = *max_attempts;
    check_run_config(c);
    return c;
  }
};

inline void write_feature_export(const fs::path& dir, const TrainedPipeline& p) {
  fs::create_directories(dir);
  const auto& m = p.training_matrix;
  std::ofstream tokens(dir / "tokens.csv"), dense(dir / "dense.csv"), labels(dir / "labels.csv"),
      vocab(dir / "vocabulary.txt");
  if (!tokens || !dense || !labels || !vocab) throw Error("cannot write feature export to " + dir.string());
  write_token_triplets_csv(tokens, m);
  write_dense_csv(dense, m);
  write_labels_csv(labels, m);
  for (const auto& t : p.model.vocabulary.tokens()) vocab << t << '\n';
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flaky-failure classification: ingest CI results, train, evaluate.", "flakesift"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "validate JSONL result files and store them by build");
  std::vector<std::string> ingest_inputs;
  std::string ingest_store, tester;
  int ingest_attempts = kDefaultMaxAttempts;
  ingest_cmd->add_option("inputs", ingest_inputs, "record files or directories of *.jsonl[.gz]")->required();
  ingest_cmd->add_option("--corpus", ingest_store, "store directory (created if missing)")->required()->envname(kCorpusEnv);
  ingest_cmd->add_option("--tester", tester, "tester name recorded in the manifest");
  ingest_cmd->add_option("--max-attempts", ingest_attempts, "initial run plus reruns (default 6)");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "corpus statistics as JSON");
  detail::ExperimentFlags stats_flags;
  stats_flags.add_to(*stats_cmd, false);
  std::string history_csv;
  stats_cmd->add_option("--history-csv", history_csv, "write the flake-rate histogram per class as CSV");

  // flake-rate
  auto* rate_cmd = app.add_subcommand("flake-rate", "flake rate of one test at one build");
  detail::ExperimentFlags rate_flags;
  rate_flags.add_to(*rate_cmd, false);
  std::string rate_test;
  BuildId rate_build = 0;
  rate_cmd->add_option("--test", rate_test, "test id")->required();
  rate_cmd->add_option("--build", rate_build, "build id")->required();

  // scan-window
  auto* scan_cmd = app.add_subcommand("scan-window", "failures with zero flake rate per window size");
  detail::ExperimentFlags scan_flags;
  scan_flags.add_to(*scan_cmd, false);
  std::vector<int> scan_windows{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  std::string scan_class = "flaky";
  scan_cmd->add_option("--windows", scan_windows, "window sizes")->delimiter(',');
  scan_cmd->add_option("--class", scan_class, "flaky, fault_revealing or all")
      ->check(CLI::IsMember({"flaky", "fault_revealing", "all"}));

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus with a ground-truth ledger");
  std::string synth_profile = "default", synth_config, synth_out, synth_verify;
  std::optional<int> synth_builds, synth_tests;
  std::optional<std::uint64_t> synth_seed;
  std::optional<double> synth_signal, synth_overlap, synth_flaky, synth_fault, synth_recurrence;
  bool synth_gzip = false;
  synth_cmd->add_option("--profile", synth_profile, "default, planted or adversarial")
      ->check(CLI::IsMember({"default", "planted", "adversarial"}));
  synth_cmd->add_option("--config", synth_config, "JSON generator settings applied over the profile")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth_out, "output directory");
  synth_cmd->add_option("--builds", synth_builds, "number of builds");
  synth_cmd->add_option("--tests", synth_tests, "number of tests");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--signal", synth_signal, "vocabulary signal strength in [0, 1]");
  synth_cmd->add_option("--overlap", synth_overlap, "fraction of fault-revealing tests that also flake");
  synth_cmd->add_option("--flaky-fraction", synth_flaky, "fraction of tests that are flaky");
  synth_cmd->add_option("--fault-rate", synth_fault, "probability that a build carries a fault");
  synth_cmd->add_option("--flake-recurrence", synth_recurrence, "probability a flaky test flakes in a build");
  synth_cmd->add_flag("--gzip", synth_gzip, "write build files gzip-compressed");
  synth_cmd->add_option("--verify", synth_verify, "check a generated directory against its ledger.json instead");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit a model on the training split and save it as JSON");
  detail::ExperimentFlags train_flags;
  train_flags.add_to(*train_cmd, true);
  std::string train_exp = "rq1", model_out, export_dir;
  train_cmd->add_option("experiment", train_exp, "rq1 (test level), rq2 or rq3 (failure level)")
      ->check(CLI::IsMember({"rq1", "rq2", "rq3"}));
  train_cmd->add_option("--model-out", model_out, "model JSON path")->required();
  train_cmd->add_option("--export-features", export_dir, "also write the training matrix as CSV here");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "train on the first builds, score the held-out failures");
  detail::ExperimentFlags eval_flags;
  eval_flags.add_to(*eval_cmd, true);
  std::string eval_exp, eval_out, eval_model;
  eval_cmd->add_option("experiment", eval_exp, "rq1, rq2 or rq3")->check(CLI::IsMember({"rq1", "rq2", "rq3"}));
  eval_cmd->add_option("--out", eval_out, "report directory");
  eval_cmd->add_option("--save-model", eval_model, "also save the trained model JSON");

  // baseline
  auto* base_cmd = app.add_subcommand("baseline", "history-only baseline: flaky iff the test flaked in the window");
  detail::ExperimentFlags base_flags;
  base_flags.add_to(*base_cmd, false);
  std::string base_out;
  base_cmd->add_option("--out", base_out, "report directory")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "render or compare report directories");
  std::vector<std::string> report_dirs;
  double tolerance = 0.0;
  bool report_json = false;
  report_cmd->add_option("reports", report_dirs, "report directory (or two with --compare)")->required();
  auto* compare_flag = report_cmd->add_flag("--compare", "compare two reports metric by metric");
  report_cmd->add_option("--tolerance", tolerance, "absolute tolerance for --compare (default 0)");
  report_cmd->add_flag("--json", report_json, "print report.json and forensics instead of a table");

  std::vector<const char*> argv{"flakesift"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) {
      std::vector<fs::path> files;
      for (const auto& in : ingest_inputs) {
        if (fs::is_directory(in)) {
          const auto found = list_record_files(in);
          files.insert(files.end(), found.begin(), found.end());
        } else {
          files.emplace_back(in);
        }
      }
      if (files.empty()) throw Error("no record files found");
      const auto m = ingest_files(files, ingest_store, {tester, ingest_attempts});
      out << manifest_to_json(m).dump(2) << '\n';
      return kExitOk;
    }

    if (*stats_cmd) {
      const auto cfg = stats_flags.resolve();
      const auto reader = open_corpus(cfg.corpus, cfg.exp.max_attempts);
      const auto stats = corpus_stats(*reader, cfg.exp.max_attempts);
      const auto records = read_all(*reader);
      const auto index = FlakeHistoryIndex::from_records(records, cfg.exp.max_attempts);
      const auto points = failing_points(records, cfg.exp.max_attempts);
      const auto dist = history_distribution(index, points, cfg.exp.window);
      auto j = corpus_stats_to_json(stats);
      j["history"] = Json{{"window", cfg.exp.window},
                          {"flaky_rate_positive", rational_to_json(dist.flaky.fraction_positive)},
                          {"flaky_rate_one", rational_to_json(dist.flaky.fraction_one)},
                          {"fault_revealing_rate_positive", rational_to_json(dist.fault_revealing.fraction_positive)},
                          {"fault_revealing_rate_one", rational_to_json(dist.fault_revealing.fraction_one)}};
      if (!history_csv.empty()) {
        std::ofstream csv(history_csv);
        if (!csv) throw Error("cannot write " + history_csv);
        write_history_csv(csv, dist);
      }
      out << j.dump(2) << '\n';
      return kExitOk;
    }

    if (*rate_cmd) {
      const auto cfg = rate_flags.resolve();
      const auto reader = open_corpus(cfg.corpus, cfg.exp.max_attempts);
      const auto ids = reader->build_ids();
      if (!std::binary_search(ids.begin(), ids.end(), rate_build))
        throw Error("build " + std::to_string(rate_build) + " is not in the corpus");
      const auto index = FlakeHistoryIndex::from_reader(*reader, ids, cfg.exp.max_attempts);
      const auto rate = index.flake_rate(rate_test, rate_build, cfg.exp.window);
      out << format_fixed(rate.value(), 6) << ' ' << rate.flaked << '/' << rate.window << '\n';
      return kExitOk;
    }

    if (*scan_cmd) {
      const auto cfg = scan_flags.resolve();
      const auto reader = open_corpus(cfg.corpus, cfg.exp.max_attempts);
      const auto records = read_all(*reader);
      const auto index = FlakeHistoryIndex::from_records(records, cfg.exp.max_attempts);
      std::vector<HistoryPoint> points;
      for (auto& p : failing_points(records, cfg.exp.max_attempts))
        if (scan_class == "all" || (scan_class == "flaky") == (p.label == OutcomeLabel::kFlaky))
          points.push_back(std::move(p));
      out << "window,zero_rate,points\n";
      for (const auto& row : window_convergence_scan(index, points, scan_windows))
        out << row.window << ',' << row.zero_rate << ',' << row.total << '\n';
      return kExitOk;
    }

    if (*synth_cmd) {
      if (!synth_verify.empty()) {
        const auto reader = open_corpus(synth_verify);
        const auto report = verify_ledger(*reader, read_ledger(fs::path(synth_verify) / "ledger.json"));
        out << ledger_report_to_json(report).dump(2) << '\n';
        return report.ok() ? kExitOk : kExitCheckFailed;
      }
      if (synth_out.empty()) throw CLI::RequiredError("--out");
      auto cfg = SynthConfig::profile(synth_profile);
      if (!synth_config.empty()) cfg = synth_config_from_json(read_json_file(synth_config), cfg);
      if (synth_builds) cfg.n_builds = *synth_builds;
      if (synth_tests) cfg.n_tests = *synth_tests;
      if (synth_seed) cfg.seed = *synth_seed;
      if (synth_signal) cfg.vocab_signal_strength = *synth_signal;
      if (synth_overlap) cfg.overlap_fraction = *synth_overlap;
      if (synth_flaky) cfg.flaky_fraction = *synth_flaky;
      if (synth_fault) cfg.fault_injection_rate = *synth_fault;
      if (synth_recurrence) cfg.flake_recurrence = *synth_recurrence;
      const auto ledger = generate(cfg, synth_out, synth_gzip);
      out << corpus_stats_to_json(ledger_stats(ledger)).dump(2) << '\n';
      return kExitOk;
    }

    if (*train_cmd) {
      auto cfg = train_flags.resolve();
      cfg.experiment = parse_experiment(train_exp);
      const auto reader = open_corpus(cfg.corpus, cfg.exp.max_attempts);
      const auto split = split_corpus(*reader, cfg.exp.split_fraction);
      const auto& e = cfg.exp;
      SampleSet training;
      if (cfg.experiment == Experiment::kRq1)
        training = assemble_test_level(*reader, split.train, e.window, e.exclusion, e.max_attempts).set;
      else
        training = assemble_failure_level(*reader, split.train, FailureSetRole::kTraining, e.window, e.max_attempts).set;
      const auto exec = cfg.experiment == Experiment::kRq3 ? e.rq3_features : ExecutionFeatureSet{};
      auto trained = train_pipeline(training, train_config(e, exec));
      trained.model.metadata = model_metadata(cfg.experiment, split, e);
      write_file_atomic(model_out, model_to_json(trained.model).dump() + "\n");
      if (!export_dir.empty()) detail::write_feature_export(export_dir, trained);
      out << Json{{"model", model_out},
                  {"rows", trained.training_matrix.rows()},
                  {"vocabulary", trained.model.vocabulary.size()},
                  {"n_trees", trained.model.params.n_trees},
                  {"k", trained.model.mask.k},
                  {"max_depth", trained.model.params.tree.max_depth}}
                 .dump(2)
          << '\n';
      return kExitOk;
    }

    if (*eval_cmd) {
      auto cfg = eval_flags.resolve();
      if (!eval_exp.empty()) cfg.experiment = parse_experiment(eval_exp);
      if (!eval_out.empty()) cfg.out = eval_out;
      if (cfg.out.empty()) throw CLI::RequiredError("--out");
      const auto reader = open_corpus(cfg.corpus, cfg.exp.max_attempts);
      const auto result = run_experiment(*reader, cfg.experiment, cfg.exp);
      write_report_dir(cfg.out, result);
      if (!eval_model.empty()) write_file_atomic(eval_model, model_to_json(*result.model).dump() + "\n");
      out << render_report(report_to_json(result));
      return kExitOk;
    }

    if (*base_cmd) {
      const auto cfg = base_flags.resolve();
      const auto reader = open_corpus(cfg.corpus, cfg.exp.max_attempts);
      const auto split = split_corpus(*reader, cfg.exp.split_fraction);
      const auto result = dummy_baseline(*reader, split, cfg.exp.window, cfg.exp.max_attempts);
      write_report_dir(base_out, result);
      out << render_report(report_to_json(result));
      return kExitOk;
    }

    if (*report_cmd) {
      auto load = [](const std::string& p) {
        const fs::path path = fs::is_directory(p) ? fs::path(p) / "report.json" : fs::path(p);
        return read_json_file(path);
      };
      if (compare_flag->count() > 0) {
        if (report_dirs.size() != 2) throw CLI::ValidationError("--compare", "needs exactly two reports");
        const auto diffs = compare_reports(load(report_dirs[0]), load(report_dirs[1]), tolerance);
        auto show = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
        Json j = Json::array();
        for (const auto& d : diffs) j.push_back(Json{{"metric", d.metric}, {"a", show(d.a)}, {"b", show(d.b)}});
        out << Json{{"tolerance", tolerance}, {"differences", j}}.dump(2) << '\n';
        return diffs.empty() ? kExitOk : kExitCheckFailed;
      }
      if (report_dirs.size() != 1) throw CLI::ValidationError("reports", "expected one report (or --compare A B)");
      const auto report = load(report_dirs[0]);
      const fs::path verdicts = fs::path(report_dirs[0]) / "verdicts.csv";
      std::optional<ForensicsBreakdown> forensics;
      if (fs::is_directory(report_dirs[0]) && fs::exists(verdicts))
        forensics = misclassification_forensics(read_verdicts_csv(verdicts));
      if (report_json) {
        Json j{{"report", report}};
        if (forensics) j["forensics"] = forensics_to_json(*forensics);
        out << j.dump(2) << '\n';
        return kExitOk;
      }
      out << render_report(report);
      if (forensics) {
        auto pct = [](const std::optional<Rational>& r) { return r ? format_percent(*r) : std::string("undefined"); };
        out << "false positives " << forensics->false_positives << " of " << forensics->fault_triggering
            << " fault-triggering failures\n"
            << "  with flake history     " << forensics->with_history << " (" << pct(forensics->with_history_fraction())
            << ")\n"
            << "  without flake history  " << forensics->without_history << " ("
            << pct(forensics->without_history_fraction()) << ")\n";
      }
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace flakesift::cli
