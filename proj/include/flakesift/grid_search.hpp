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

// Hyperparameter grid search with forward-chaining validation: the distinct
// build ids of the training rows are cut into folds+1 contiguous slices and
// fold i trains on slices [0, i) and validates on slice i. No fold ever
// validates on a build at or before its training cut.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "flakesift/features.hpp"
#include "flakesift/forest.hpp"
#include "flakesift/metrics.hpp"

namespace flakesift {

struct HyperGrid {
  std::vector<int> n_trees{50, 100, 200};
  std::vector<int> k{500, 1000, 2000};
  std::vector<int> max_depth{0};  // 0 = unlimited
  int folds = 3;

  void check() const {
    if (n_trees.empty() || k.empty() || max_depth.empty()) throw Error("hyper grid: empty candidate set");
    if (folds < 2) throw Error("hyper grid: folds must be >= 2");
    for (int v : n_trees)
      if (v < 1) throw Error("hyper grid: n_trees must be >= 1");
    for (int v : k)
      if (v < 1) throw Error("hyper grid: k must be >= 1");
    for (int v : max_depth)
      if (v < 0) throw Error("hyper grid: max_depth must be >= 0");
  }
};

struct Fold {
  BuildId train_cut = 0;  // train on rows with build_id <= train_cut
  BuildRange validate;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validate_rows;
  bool skipped = false;
  std::string skip_reason;
};

struct GridCell {
  int n_trees = 0;
  int k = 0;
  int max_depth = 0;
  double mean_mcc = 0.0;
  std::vector<double> fold_mcc;  // scored folds only
};

struct GridResult {
  GridCell best;
  std::vector<GridCell> cells;
  std::vector<Fold> folds;
};

/// MCC of a confusion matrix, with an undefined value scored as 0.
inline double mcc_or_zero(const ConfusionMatrix& cm) {
  const auto m = compute_metrics(cm);
  return m.mcc ? m.mcc->value() : 0.0;
}

/// Rows must be sorted by build id (the order the assemblers produce).
inline std::vector<Fold> forward_chaining_folds(std::span<const RowProvenance> provenance,
                                                std::span<const std::uint8_t> labels, int folds) {
  if (folds < 2) throw Error("folds must be >= 2");
  for (std::size_t i = 1; i < provenance.size(); ++i)
    if (provenance[i].build_id < provenance[i - 1].build_id)
      throw Error("grid search needs rows in build order; provenance is not time ordered");
  std::vector<BuildId> builds;
  for (const auto& p : provenance)
    if (builds.empty() || builds.back() != p.build_id) builds.push_back(p.build_id);
  const std::size_t slices = static_cast<std::size_t>(folds) + 1;
  if (builds.size() < slices)
    throw Error("grid search: " + std::to_string(builds.size()) + " distinct builds, need at least " +
                std::to_string(slices));

  auto slice_last = [&](std::size_t s) { return builds[(s + 1) * builds.size() / slices - 1]; };
  std::vector<Fold> out;
  for (std::size_t f = 1; f < slices; ++f) {
    Fold fold;
    fold.train_cut = slice_last(f - 1);
    fold.validate = {builds[f * builds.size() / slices], slice_last(f)};
    std::size_t cls_train[2] = {0, 0}, cls_val[2] = {0, 0};
    for (std::size_t r = 0; r < provenance.size(); ++r) {
      const auto b = provenance[r].build_id;
      if (b <= fold.train_cut) {
        fold.train_rows.push_back(r);
        ++cls_train[labels[r] ? 1 : 0];
      } else if (fold.validate.contains(b)) {
        fold.validate_rows.push_back(r);
        ++cls_val[labels[r] ? 1 : 0];
      }
    }
    if (cls_train[0] == 0 || cls_train[1] == 0) {
      fold.skipped = true;
      fold.skip_reason = "training slice has a single class";
    } else if (cls_val[0] == 0 || cls_val[1] == 0) {
      fold.skipped = true;
      fold.skip_reason = "validation slice has a single class";
    }
    out.push_back(std::move(fold));
  }
  return out;
}

/// Scores every (n_trees, k, max_depth) cell by mean validation MCC over
/// the scored folds. For a given fold, k and depth one forest of
/// max(n_trees) trees is grown; smaller candidates are its prefixes, which
/// is exactly what a smaller forest with the same seed would contain.
/// Best cell: highest mean; ties go to fewer trees, then smaller k, then
/// shallower depth.
inline GridResult grid_search(const FeatureMatrix& m, const HyperGrid& grid, const ForestParams& base) {
  grid.check();
  GridResult result;
  result.folds = forward_chaining_folds(m.provenance, m.labels, grid.folds);

  auto n_trees = grid.n_trees;
  auto ks = grid.k;
  auto depths = grid.max_depth;
  std::sort(n_trees.begin(), n_trees.end());
  n_trees.erase(std::unique(n_trees.begin(), n_trees.end()), n_trees.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  // Unlimited depth sorts last.
  std::sort(depths.begin(), depths.end(), [](int a, int b) {
    return (a == 0 ? INT32_MAX : a) < (b == 0 ? INT32_MAX : b);
  });
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());

  for (int t : n_trees)
    for (int k : ks)
      for (int d : depths) result.cells.push_back({t, k, d, 0.0, {}});
  auto cell_at = [&](std::size_t ti, std::size_t ki, std::size_t di) -> GridCell& {
    return result.cells[(ti * ks.size() + ki) * depths.size() + di];
  };

  bool any = false;
  for (const auto& fold : result.folds) {
    if (fold.skipped) continue;
    any = true;
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const auto mask = chi2_select(m, m.labels, ks[ki], SelectionScope::kTokens, fold.train_rows);
      const auto x = project(m, mask);
      for (std::size_t di = 0; di < depths.size(); ++di) {
        ForestParams p = base;
        p.n_trees = n_trees.back();
        p.tree.max_depth = depths[di];
        const auto forest = fit_forest(x, m.labels, p, fold.train_rows);
        // Running sums over tree prefixes.
        std::vector<double> sums(fold.validate_rows.size(), 0.0);
        std::size_t grown = 0;
        for (std::size_t ti = 0; ti < n_trees.size(); ++ti) {
          const auto upto = static_cast<std::size_t>(n_trees[ti]);
          for (std::size_t v = 0; v < fold.validate_rows.size(); ++v)
            for (std::size_t t = grown; t < upto; ++t)
              sums[v] += forest.trees()[t].predict(x, fold.validate_rows[v]);
          grown = upto;
          ConfusionMatrix cm;
          for (std::size_t v = 0; v < fold.validate_rows.size(); ++v) {
            const double prob = sums[v] / static_cast<double>(upto);
            cm.add(m.labels[fold.validate_rows[v]] != 0, prob >= 0.5);
          }
          cell_at(ti, ki, di).fold_mcc.push_back(mcc_or_zero(cm));
        }
      }
    }
  }
  if (!any) throw Error("grid search: every fold was skipped (single-class slices)");

  const GridCell* best = nullptr;
  for (auto& c : result.cells) {
    double s = 0;
    for (double v : c.fold_mcc) s += v;
    c.mean_mcc = s / static_cast<double>(c.fold_mcc.size());
    if (!best || c.mean_mcc > best->mean_mcc) best = &c;
  }
  result.best = *best;
  return result;
}

inline Json grid_to_json(const GridResult& g) {
  Json cells = Json::array();
  for (const auto& c : g.cells)
    cells.push_back(Json{{"n_trees", c.n_trees}, {"k", c.k}, {"max_depth", c.max_depth},
                         {"mean_mcc", c.mean_mcc}, {"fold_mcc", c.fold_mcc}});
  Json folds = Json::array();
  for (const auto& f : g.folds)
    folds.push_back(Json{{"train_cut", f.train_cut},
                         {"validate", {f.validate.lo, f.validate.hi}},
                         {"train_rows", f.train_rows.size()},
                         {"validate_rows", f.validate_rows.size()},
                         {"skipped", f.skipped},
                         {"skip_reason", f.skip_reason}});
  return Json{{"best", {{"n_trees", g.best.n_trees}, {"k", g.best.k}, {"max_depth", g.best.max_depth},
                        {"mean_mcc", g.best.mean_mcc}}},
              {"cells", cells},
              {"folds", folds}};
}

}  // namespace flakesift
