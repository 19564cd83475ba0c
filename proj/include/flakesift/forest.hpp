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

// CART classification trees (Gini impurity, midpoint thresholds) and a
// balanced random forest: every tree is grown on a bootstrap that draws the
// same number of rows from each class.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "flakesift/error.hpp"
#include "flakesift/features.hpp"
#include "flakesift/random.hpp"
#include "flakesift/records_io.hpp"

namespace flakesift {

struct TreeParams {
  int max_depth = 0;     // 0 = unlimited
  int min_leaf = 1;
  int max_features = 0;  // 0 = floor(sqrt(F))

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double probability = 0.0;   // positive fraction of the node's samples
  std::uint32_t samples = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes in preorder; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  template <class ValueFn>
  const TreeNode& leaf_for(ValueFn&& value) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(value(static_cast<std::size_t>(nodes[i].feature)) <= nodes[i].threshold
                                       ? nodes[i].left
                                       : nodes[i].right);
    return nodes[i];
  }

  double predict(const DesignMatrix& x, std::size_t row) const {
    return leaf_for([&](std::size_t f) { return x.at(row, f); }).probability;
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes[i].is_leaf()) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

inline int default_max_features(std::size_t n_features) {
  return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));
}

/// Grows one tree on `sample_indices` (duplicates allowed). At each node up
/// to max_features non-constant features are examined in random order;
/// constant features are skipped without counting, so a split is found
/// whenever one exists. Stops at purity, max_depth, or when no split leaves
/// min_leaf samples on both sides.
inline Tree fit_tree(const DesignMatrix& x, std::span<const std::uint8_t> labels,
                     std::span<const std::size_t> sample_indices, CounterRng& rng,
                     const TreeParams& params = {}) {
  if (sample_indices.empty()) throw Error("fit_tree: no samples");
  const std::size_t n_features = x.cols();
  const int mtry = params.max_features > 0 ? params.max_features : default_max_features(n_features);
  const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params.min_leaf));

  std::vector<std::size_t> idx(sample_indices.begin(), sample_indices.end());
  std::vector<std::uint32_t> perm(n_features);
  std::iota(perm.begin(), perm.end(), 0u);
  std::vector<std::pair<double, std::uint8_t>> vals;

  struct Work {
    std::size_t begin, end;
    int depth;
    std::size_t node;
  };
  Tree tree;
  tree.nodes.emplace_back();
  std::vector<Work> stack{{0, idx.size(), 0, 0}};

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::size_t n = w.end - w.begin;
    std::size_t pos = 0;
    for (std::size_t i = w.begin; i < w.end; ++i) pos += labels[idx[i]] ? 1 : 0;
    {
      auto& node = tree.nodes[w.node];
      node.samples = static_cast<std::uint32_t>(n);
      node.probability = static_cast<double>(pos) / static_cast<double>(n);
    }
    if (pos == 0 || pos == n || (params.max_depth > 0 && w.depth >= params.max_depth) || n < 2 * min_leaf)
      continue;

    // Maximizing sum over children of (pos^2 + neg^2) / size is the same as
    // minimizing the size-weighted Gini impurity.
    double best_score = -1.0;
    std::int64_t best_feature = -1;
    double best_threshold = 0.0;
    int evaluated = 0;
    for (std::size_t j = 0; j < n_features && evaluated < mtry; ++j) {
      const std::size_t r = j + static_cast<std::size_t>(rng.uniform(n_features - j));
      std::swap(perm[j], perm[r]);
      const std::uint32_t f = perm[j];

      vals.clear();
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = w.begin; i < w.end; ++i) {
        const double v = x.at(idx[i], f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        vals.emplace_back(v, labels[idx[i]]);
      }
      if (!(lo < hi)) continue;
      ++evaluated;
      std::sort(vals.begin(), vals.end());

      std::size_t left_n = 0, left_pos = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left_n;
        left_pos += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const std::size_t right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double lp = static_cast<double>(left_pos), ln = static_cast<double>(left_n - left_pos);
        const double rp = static_cast<double>(pos - left_pos), rn = static_cast<double>(right_n - (pos - left_pos));
        const double score = (lp * lp + ln * ln) / static_cast<double>(left_n) +
                             (rp * rp + rn * rn) / static_cast<double>(right_n);
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          const double a = vals[i].first, b = vals[i + 1].first;
          double t = a + (b - a) / 2;
          if (!(t < b)) t = a;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) continue;

    auto mid = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                     idx.begin() + static_cast<std::ptrdiff_t>(w.end), [&](std::size_t row) {
                                       return x.at(row, static_cast<std::size_t>(best_feature)) <= best_threshold;
                                     });
    const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
    const std::size_t left = tree.nodes.size();
    tree.nodes.emplace_back();
    const std::size_t right = tree.nodes.size();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[w.node];
    node.feature = static_cast<std::int32_t>(best_feature);
    node.threshold = best_threshold;
    node.left = static_cast<std::int32_t>(left);
    node.right = static_cast<std::int32_t>(right);
    stack.push_back({split, w.end, w.depth + 1, right});
    stack.push_back({w.begin, split, w.depth + 1, left});
  }

  // Renumber into preorder so serialized trees do not depend on the
  // traversal used while growing.
  std::vector<std::int32_t> order;
  order.reserve(tree.nodes.size());
  std::vector<std::int32_t> todo{0};
  while (!todo.empty()) {
    const auto i = todo.back();
    todo.pop_back();
    order.push_back(i);
    const auto& nd = tree.nodes[static_cast<std::size_t>(i)];
    if (!nd.is_leaf()) {
      todo.push_back(nd.right);
      todo.push_back(nd.left);
    }
  }
  std::vector<std::int32_t> new_id(tree.nodes.size());
  for (std::size_t k = 0; k < order.size(); ++k) new_id[static_cast<std::size_t>(order[k])] = static_cast<std::int32_t>(k);
  Tree out;
  out.nodes.reserve(order.size());
  for (auto i : order) {
    auto nd = tree.nodes[static_cast<std::size_t>(i)];
    if (!nd.is_leaf()) {
      nd.left = new_id[static_cast<std::size_t>(nd.left)];
      nd.right = new_id[static_cast<std::size_t>(nd.right)];
    }
    out.nodes.push_back(nd);
  }
  return out;
}

/// n_min draws with replacement from each class, n_min being the smaller
/// class size; negatives first, then positives. `rows` restricts the pool
/// (empty = every row).
inline std::vector<std::size_t> balanced_bootstrap(std::span<const std::uint8_t> labels, CounterRng& rng,
                                                   std::span<const std::size_t> rows = {}) {
  std::vector<std::size_t> by_class[2];
  if (rows.empty()) {
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] ? 1 : 0].push_back(i);
  } else {
    for (auto i : rows) by_class[labels[i] ? 1 : 0].push_back(i);
  }
  const std::size_t n_min = std::min(by_class[0].size(), by_class[1].size());
  if (n_min == 0) throw Error("balanced_bootstrap: both classes must be present");
  std::vector<std::size_t> out;
  out.reserve(2 * n_min);
  for (const auto& pool : by_class)
    for (std::size_t k = 0; k < n_min; ++k) out.push_back(pool[rng.uniform(pool.size())]);
  return out;
}

struct ForestParams {
  int n_trees = 100;
  TreeParams tree;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

class Forest {
 public:
  Forest() = default;
  Forest(std::vector<Tree> trees, std::size_t n_features) : trees_(std::move(trees)), n_features_(n_features) {}

  const std::vector<Tree>& trees() const noexcept { return trees_; }
  std::size_t n_features() const noexcept { return n_features_; }

  /// Mean leaf probability over the first `n_trees` trees (all by default),
  /// accumulated in tree order.
  double predict_proba(const DesignMatrix& x, std::size_t row, std::size_t n_trees = 0) const {
    if (x.cols() != n_features_)
      throw Error("predict: matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                  std::to_string(n_features_));
    if (n_trees == 0 || n_trees > trees_.size()) n_trees = trees_.size();
    if (n_trees == 0) throw Error("predict: empty forest");
    double sum = 0;
    for (std::size_t t = 0; t < n_trees; ++t) sum += trees_[t].predict(x, row);
    return sum / static_cast<double>(n_trees);
  }

  friend bool operator==(const Forest&, const Forest&) = default;

 private:
  std::vector<Tree> trees_;
  std::size_t n_features_ = 0;
};

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Tree t draws from its own stream CounterRng(seed, t), so a forest of n
/// trees is exactly the first n trees of any larger forest with the same
/// seed, and results do not depend on the worker count.
inline Forest fit_forest(const DesignMatrix& x, std::span<const std::uint8_t> labels, const ForestParams& params,
                         std::span<const std::size_t> rows = {}) {
  if (params.n_trees < 1) throw Error("fit_forest: n_trees must be >= 1");
  if (labels.size() != x.rows()) throw Error("fit_forest: label count mismatch");
  std::vector<Tree> trees(static_cast<std::size_t>(params.n_trees));
  detail::parallel_for(trees.size(), params.threads, [&](std::size_t t) {
    CounterRng rng(params.seed, t);
    const auto sample = balanced_bootstrap(labels, rng, rows);
    trees[t] = fit_tree(x, labels, sample, rng, params.tree);
  });
  return Forest(std::move(trees), x.cols());
}

struct Prediction {
  double probability = 0.0;
  bool flaky = false;
};

inline std::vector<Prediction> predict(const Forest& forest, const DesignMatrix& x, double threshold = 0.5,
                                       std::size_t n_trees = 0) {
  std::vector<Prediction> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double p = forest.predict_proba(x, r, n_trees);
    out[r] = {p, p >= threshold};
  }
  return out;
}

// Serialization: each tree is an array of nodes, each node an array
// [feature, threshold, left, right, probability, samples].

inline Json tree_to_json(const Tree& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes)
    nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.probability, n.samples}));
  return nodes;
}

inline Tree tree_from_json(const Json& j) {
  Tree t;
  for (const auto& n : j) {
    if (!n.is_array() || n.size() != 6) throw ParseError("tree node must be a 6-element array");
    TreeNode node;
    node.feature = n[0].get<std::int32_t>();
    node.threshold = n[1].get<double>();
    node.left = n[2].get<std::int32_t>();
    node.right = n[3].get<std::int32_t>();
    node.probability = n[4].get<double>();
    node.samples = n[5].get<std::uint32_t>();
    t.nodes.push_back(node);
  }
  const auto size = static_cast<std::int32_t>(t.nodes.size());
  if (size == 0) throw ParseError("empty tree");
  for (const auto& n : t.nodes) {
    if (!std::isfinite(n.threshold) || n.probability < 0 || n.probability > 1)
      throw ValidationError("tree node with invalid threshold or probability");
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
      throw ValidationError("tree node with invalid child index");
  }
  return t;
}

}  // namespace flakesift
