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

// A trained pipeline: frozen vocabulary, chi-square mask, execution feature
// set and balanced forest, plus everything needed to rebuild its training
// matrix. Serialized as self-describing JSON.

#include <cinttypes>
#include <cstdio>
#include <optional>
#include <string>

#include "flakesift/datasets.hpp"
#include "flakesift/features.hpp"
#include "flakesift/forest.hpp"
#include "flakesift/grid_search.hpp"

namespace flakesift {

inline constexpr int kModelSchemaVersion = 1;

struct TrainConfig {
  TokenizerConfig tokenizer;
  ExecutionFeatureSet execution;
  int k = 1000;
  ForestParams forest;
  double threshold = 0.5;
  bool tune = true;
  HyperGrid grid;
};

struct FlakeModel {
  Vocabulary vocabulary;
  SelectionMask mask;
  ExecutionFeatureSet execution;
  ForestParams params;
  double threshold = 0.5;
  Forest forest;
  Json metadata = Json::object();

  /// Projects a matrix built with this model's vocabulary and feature set.
  DesignMatrix design(const FeatureMatrix& m) const {
    if (m.token_cols != vocabulary.size())
      throw Error("matrix has " + std::to_string(m.token_cols) + " token columns, model vocabulary has " +
                  std::to_string(vocabulary.size()));
    if (m.dense_names != execution.column_names()) throw Error("matrix execution features do not match model");
    return project(m, mask);
  }

  std::vector<Prediction> predict(const FeatureMatrix& m) const {
    return flakesift::predict(forest, design(m), threshold);
  }

  FeatureMatrix vectorize(const SampleSet& set) const { return to_feature_matrix(set, vocabulary, execution); }
};

struct TrainedPipeline {
  FlakeModel model;
  std::optional<GridResult> grid;
  FeatureMatrix training_matrix;
};

/// Fits vocabulary on the training sources, optionally grid-searches
/// (n_trees, k, max_depth), then fits the final forest on every row.
inline TrainedPipeline train_pipeline(const SampleSet& training, const TrainConfig& cfg) {
  TrainedPipeline out;
  auto& model = out.model;
  model.vocabulary = fit_vocabulary(referenced_sources(training), cfg.tokenizer);
  model.execution = cfg.execution;
  model.threshold = cfg.threshold;
  model.params = cfg.forest;
  out.training_matrix = to_feature_matrix(training, model.vocabulary, cfg.execution);
  const auto& m = out.training_matrix;

  int k = cfg.k;
  if (cfg.tune) {
    out.grid = grid_search(m, cfg.grid, cfg.forest);
    k = out.grid->best.k;
    model.params.n_trees = out.grid->best.n_trees;
    model.params.tree.max_depth = out.grid->best.max_depth;
  }
  model.mask = chi2_select(m, m.labels, k);
  model.forest = fit_forest(project(m, model.mask), m.labels, model.params);
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

inline Json model_to_json(const FlakeModel& m) {
  Json trees = Json::array();
  for (const auto& t : m.forest.trees()) trees.push_back(tree_to_json(t));
  const auto& tok = m.vocabulary.tokenizer();
  return Json{
      {"schema_version", kModelSchemaVersion},
      {"hyperparameters",
       {{"n_trees", m.params.n_trees},
        {"k", m.mask.k},
        {"max_depth", m.params.tree.max_depth},
        {"min_leaf", m.params.tree.min_leaf},
        {"max_features", m.params.tree.max_features},
        {"seed", m.params.seed},
        {"threshold", m.threshold}}},
      {"tokenizer", {{"camel_split", tok.camel_split}, {"min_length", tok.min_length}}},
      {"vocabulary_hash", hex64(m.vocabulary.hash())},
      {"vocabulary", m.vocabulary.tokens()},
      {"mask", {{"k", m.mask.k}, {"selected", m.mask.selected}}},
      {"execution_features", m.execution.column_names()},
      {"execution_feature_set", m.execution.str()},
      {"n_features", m.forest.n_features()},
      {"metadata", m.metadata},
      {"trees", trees}};
}

inline FlakeModel model_from_json(const Json& j) {
  FlakeModel m;
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion) throw ValidationError("unsupported model schema_version");
    const auto& hp = j.at("hyperparameters");
    m.params.n_trees = hp.at("n_trees").get<int>();
    m.params.tree.max_depth = hp.at("max_depth").get<int>();
    m.params.tree.min_leaf = hp.at("min_leaf").get<int>();
    m.params.tree.max_features = hp.at("max_features").get<int>();
    m.params.seed = hp.at("seed").get<std::uint64_t>();
    m.threshold = hp.at("threshold").get<double>();
    TokenizerConfig tok;
    tok.camel_split = j.at("tokenizer").at("camel_split").get<bool>();
    tok.min_length = j.at("tokenizer").at("min_length").get<std::size_t>();
    m.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>(), tok);
    if (hex64(m.vocabulary.hash()) != j.at("vocabulary_hash").get<std::string>())
      throw ValidationError("model vocabulary hash mismatch");
    m.mask.k = j.at("mask").at("k").get<int>();
    m.mask.selected = j.at("mask").at("selected").get<std::vector<std::uint32_t>>();
    for (auto c : m.mask.selected)
      if (c >= m.vocabulary.size()) throw ValidationError("model mask refers to a column outside the vocabulary");
    m.execution = ExecutionFeatureSet::parse(j.at("execution_feature_set").get<std::string>());
    m.metadata = j.at("metadata");
    std::vector<Tree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(tree_from_json(t));
    const auto n_features = j.at("n_features").get<std::size_t>();
    if (n_features != m.mask.selected.size() + m.execution.column_names().size())
      throw ValidationError("model n_features inconsistent with mask and execution features");
    for (const auto& t : trees)
      for (const auto& n : t.nodes)
        if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= n_features)
          throw ValidationError("tree splits on a feature outside the model");
    m.forest = Forest(std::move(trees), n_features);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bad model file: ") + e.what());
  }
  return m;
}

}  // namespace flakesift
