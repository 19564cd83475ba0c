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

// Run configuration shared by the command-line tool. A JSON file supplies
// any subset of the keys below; command-line flags override it.
//
//   corpus            store directory                       (none)
//   out               report / output directory             (none)
//   experiment        "rq1" | "rq2" | "rq3"                  "rq1"
//   window            flake-rate window                     35
//   split_fraction    share of builds used for training     0.8
//   camel_split       split identifiers on case changes     true
//   execution_features  rq3 feature set                     "duration,flake_rate"
//   tune              grid-search hyperparameters           true
//   grid              {n_trees: [...], k: [...], max_depth: [...], folds}
//   n_trees, k, max_depth   used when tune is false         100, 1000, 0
//   threshold         probability cut for "flaky"           0.5
//   seed              forest seed                           0
//   threads           0 = all cores                         0
//   negative_exclusion  "training_range" | "whole_corpus"   "training_range"
//   max_attempts      initial run + reruns                  6

#include <string>

#include "flakesift/experiment.hpp"

namespace flakesift {

struct RunConfig {
  std::string corpus;
  std::string out;
  Experiment experiment = Experiment::kRq1;
  ExperimentConfig exp;
};

inline std::string_view to_string(NegativeExclusion e) noexcept {
  return e == NegativeExclusion::kWholeCorpus ? "whole_corpus" : "training_range";
}

inline NegativeExclusion parse_negative_exclusion(std::string_view s) {
  if (s == "training_range") return NegativeExclusion::kTrainingRange;
  if (s == "whole_corpus") return NegativeExclusion::kWholeCorpus;
  throw Error("negative_exclusion must be training_range or whole_corpus");
}

inline const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys{
      "corpus", "out",   "experiment", "window",    "split_fraction", "camel_split", "execution_features",
      "tune",   "grid",  "n_trees",    "k",         "max_depth",      "threshold",   "seed",
      "threads", "negative_exclusion", "max_attempts"};
  return keys;
}

/// Overlays `j` onto `base`. Unknown keys are rejected so typos surface.
inline RunConfig run_config_from_json(const Json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  const auto& keys = run_config_keys();
  for (const auto& [key, _] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ValidationError("unknown config key \"" + key + "\"");
  auto& e = base.exp;
  try {
    if (j.contains("corpus")) base.corpus = j["corpus"].get<std::string>();
    if (j.contains("out")) base.out = j["out"].get<std::string>();
    if (j.contains("experiment")) base.experiment = parse_experiment(j["experiment"].get<std::string>());
    if (j.contains("window")) e.window = j["window"].get<int>();
    if (j.contains("split_fraction")) e.split_fraction = j["split_fraction"].get<double>();
    if (j.contains("camel_split")) e.tokenizer.camel_split = j["camel_split"].get<bool>();
    if (j.contains("execution_features"))
      e.rq3_features = ExecutionFeatureSet::parse(j["execution_features"].get<std::string>());
    if (j.contains("tune")) e.tune = j["tune"].get<bool>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("n_trees")) e.grid.n_trees = g["n_trees"].get<std::vector<int>>();
      if (g.contains("k")) e.grid.k = g["k"].get<std::vector<int>>();
      if (g.contains("max_depth")) e.grid.max_depth = g["max_depth"].get<std::vector<int>>();
      if (g.contains("folds")) e.grid.folds = g["folds"].get<int>();
    }
    if (j.contains("n_trees")) e.forest.n_trees = j["n_trees"].get<int>();
    if (j.contains("k")) e.k = j["k"].get<int>();
    if (j.contains("max_depth")) e.forest.tree.max_depth = j["max_depth"].get<int>();
    if (j.contains("threshold")) e.threshold = j["threshold"].get<double>();
    if (j.contains("seed")) e.forest.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) e.forest.threads = j["threads"].get<unsigned>();
    if (j.contains("negative_exclusion"))
      e.exclusion = parse_negative_exclusion(j["negative_exclusion"].get<std::string>());
    if (j.contains("max_attempts")) e.max_attempts = j["max_attempts"].get<int>();
  } catch (const Json::exception& ex) {
    throw ParseError(std::string("bad config value: ") + ex.what());
  }
  return base;
}

inline Json run_config_to_json(const RunConfig& c) {
  const auto& e = c.exp;
  return Json{{"corpus", c.corpus},
              {"out", c.out},
              {"experiment", to_string(c.experiment)},
              {"window", e.window},
              {"split_fraction", e.split_fraction},
              {"camel_split", e.tokenizer.camel_split},
              {"execution_features", e.rq3_features.str()},
              {"tune", e.tune},
              {"grid", {{"n_trees", e.grid.n_trees}, {"k", e.grid.k}, {"max_depth", e.grid.max_depth}, {"folds", e.grid.folds}}},
              {"n_trees", e.forest.n_trees},
              {"k", e.k},
              {"max_depth", e.forest.tree.max_depth},
              {"threshold", e.threshold},
              {"seed", e.forest.seed},
              {"threads", e.forest.threads},
              {"negative_exclusion", to_string(e.exclusion)},
              {"max_attempts", e.max_attempts}};
}

/// Checks ranges that the individual stages would otherwise reject late.
inline void check_run_config(const RunConfig& c) {
  const auto& e = c.exp;
  if (e.window < 1) throw ValidationError("window must be >= 1");
  if (!(e.split_fraction > 0 && e.split_fraction < 1)) throw ValidationError("split_fraction must be in (0, 1)");
  if (e.k < 1) throw ValidationError("k must be >= 1");
  if (e.forest.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (e.forest.tree.max_depth < 0) throw ValidationError("max_depth must be >= 0");
  if (!(e.threshold >= 0 && e.threshold <= 1)) throw ValidationError("threshold must be in [0, 1]");
  if (e.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  if (e.tune) e.grid.check();
}

}  // namespace flakesift
