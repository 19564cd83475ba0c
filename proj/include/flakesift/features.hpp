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

// Bag-of-words vectorization, execution features and chi-square top-k
// selection.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flakesift/core.hpp"
#include "flakesift/error.hpp"
#include "flakesift/store.hpp"

namespace flakesift {

struct TokenizerConfig {
  bool camel_split = true;
  std::size_t min_length = 2;

  std::string fingerprint() const {
    return "ascii-alnum;lower;min=" + std::to_string(min_length) +
           ";camel=" + (camel_split ? "1" : "0");
  }
};

namespace detail {
constexpr bool is_alnum(unsigned char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
constexpr bool is_upper(unsigned char c) noexcept { return c >= 'A' && c <= 'Z'; }
constexpr bool is_lower(unsigned char c) noexcept { return c >= 'a' && c <= 'z'; }
constexpr char to_lower(unsigned char c) noexcept {
  return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}
}  // namespace detail

/// Lowercased maximal runs of ASCII letters and digits. Any other byte,
/// including every byte of a non-ASCII or invalid UTF-8 sequence, is a
/// separator. With camel_split, "waitUntilDone" -> wait, until, done and
/// "HTMLParser" -> html, parser. Tokens shorter than min_length are dropped.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg = {}) {
  std::vector<std::string> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    if (e - b < cfg.min_length) return;
    std::string tok(e - b, '\0');
    for (std::size_t i = b; i < e; ++i) tok[i - b] = detail::to_lower(static_cast<unsigned char>(text[i]));
    out.push_back(std::move(tok));
  };
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && !detail::is_alnum(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t run_begin = i;
    while (i < n && detail::is_alnum(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t run_end = i;
    if (run_begin == run_end) continue;
    if (!cfg.camel_split) {
      emit(run_begin, run_end);
      continue;
    }
    std::size_t start = run_begin;
    for (std::size_t k = run_begin + 1; k < run_end; ++k) {
      const auto prev = static_cast<unsigned char>(text[k - 1]);
      const auto cur = static_cast<unsigned char>(text[k]);
      const bool next_lower = k + 1 < run_end && detail::is_lower(static_cast<unsigned char>(text[k + 1]));
      // aB -> a|B ; ABc -> A|Bc
      if ((detail::is_lower(prev) && detail::is_upper(cur)) ||
          (detail::is_upper(prev) && detail::is_upper(cur) && next_lower)) {
        emit(start, k);
        start = k;
      }
    }
    emit(start, run_end);
  }
  return out;
}

/// Token -> column map, sorted lexicographically, frozen after fit.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> sorted_tokens, TokenizerConfig cfg)
      : tokens_(std::move(sorted_tokens)), cfg_(cfg) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (i > 0 && !(tokens_[i - 1] < tokens_[i])) throw Error("vocabulary tokens must be sorted and unique");
      index_.emplace(tokens_[i], static_cast<std::uint32_t>(i));
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const TokenizerConfig& tokenizer() const noexcept { return cfg_; }
  std::string fingerprint() const { return cfg_.fingerprint(); }

  std::optional<std::uint32_t> find(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// FNV-1a over fingerprint and tokens.
  std::uint64_t hash() const {
    std::uint64_t h = fnv1a64(fingerprint());
    for (const auto& t : tokens_) {
      h = fnv1a64(std::string_view("\n", 1), h);
      h = fnv1a64(t, h);
    }
    return h;
  }

  /// Sparse (column, count) pairs sorted by column; unknown tokens dropped.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> transform(std::string_view text) const {
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& tok : tokenize(text, cfg_))
      if (auto col = find(tok)) ++counts[*col];
    return {counts.begin(), counts.end()};
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.cfg_.fingerprint() == b.cfg_.fingerprint();
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
  TokenizerConfig cfg_;
};

/// Vocabulary of every token seen in `corpus`. Throws if the corpus is empty
/// or yields no tokens at all.
inline Vocabulary fit_vocabulary(std::span<const std::string> corpus, const TokenizerConfig& cfg = {}) {
  if (corpus.empty()) throw Error("fit_vocabulary: empty corpus");
  std::vector<std::string> toks;
  for (const auto& doc : corpus) {
    auto t = tokenize(doc, cfg);
    std::move(t.begin(), t.end(), std::back_inserter(toks));
  }
  std::sort(toks.begin(), toks.end());
  toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
  if (toks.empty()) throw Error("fit_vocabulary: corpus contains no tokens");
  return Vocabulary(std::move(toks), cfg);
}

// ---------------------------------------------------------------------------
// Execution features

struct ExecutionFeatureSet {
  bool duration = false;
  bool flake_rate = false;
  bool status = false;
  bool tag_status = false;

  bool any() const noexcept { return duration || flake_rate || status || tag_status; }

  /// Default set used when execution features are switched on.
  static ExecutionFeatureSet standard() { return {true, true, false, false}; }
  static ExecutionFeatureSet all() { return {true, true, true, true}; }

  /// Parses "duration,flake_rate,status,tag_status" (any subset, or "none").
  static ExecutionFeatureSet parse(std::string_view spec) {
    ExecutionFeatureSet s;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      const auto item = spec.substr(pos, comma == std::string_view::npos ? spec.size() - pos : comma - pos);
      if (item == "duration") s.duration = true;
      else if (item == "flake_rate") s.flake_rate = true;
      else if (item == "status") s.status = true;
      else if (item == "tag_status") s.tag_status = true;
      else if (item != "none" && !item.empty())
        throw Error("unknown execution feature \"" + std::string(item) + "\"");
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return s;
  }

  std::string str() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!out.empty()) out += ',';
      out += name;
    };
    add(duration, "duration");
    add(flake_rate, "flake_rate");
    add(status, "status");
    add(tag_status, "tag_status");
    return out.empty() ? "none" : out;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    if (duration) names.emplace_back("runDuration");
    if (flake_rate) names.emplace_back("flakeRate");
    if (status)
      for (auto s : kAllRunStatuses) names.push_back("runStatus=" + std::string(to_string(s)));
    if (tag_status)
      for (auto t : kAllRunTagStatuses) names.push_back("runTagStatus=" + std::string(to_string(t)));
    return names;
  }

  friend bool operator==(const ExecutionFeatureSet&, const ExecutionFeatureSet&) = default;
};

/// Raw execution values of one sample before encoding.
struct ExecutionValues {
  double duration = 0.0;
  double flake_rate = 0.0;
  RunStatus status = RunStatus::kPass;
  RunTagStatus tag_status = RunTagStatus::kPass;
};

inline std::vector<double> encode_execution(const ExecutionValues& v, const ExecutionFeatureSet& set) {
  std::vector<double> out;
  if (set.duration) out.push_back(v.duration);
  if (set.flake_rate) out.push_back(v.flake_rate);
  if (set.status)
    for (auto s : kAllRunStatuses) out.push_back(s == v.status ? 1.0 : 0.0);
  if (set.tag_status)
    for (auto t : kAllRunTagStatuses) out.push_back(t == v.tag_status ? 1.0 : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Feature matrix

struct RowProvenance {
  std::string test_id;
  BuildId build_id = 0;
  int attempt_index = -1;  // -1 for test-level rows

  friend bool operator==(const RowProvenance&, const RowProvenance&) = default;
};

/// Sparse token counts (CSR) aligned to a vocabulary, an optional dense
/// block of execution features, row provenance and binary labels
/// (1 = flaky).
struct FeatureMatrix {
  std::size_t token_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<std::uint32_t> count;

  std::vector<std::string> dense_names;
  std::vector<double> dense;  // row-major, rows() x dense_names.size()

  std::vector<RowProvenance> provenance;
  std::vector<std::uint8_t> labels;

  std::size_t rows() const noexcept { return row_ptr.size() - 1; }
  std::size_t dense_cols() const noexcept { return dense_names.size(); }
  std::size_t cols() const noexcept { return token_cols + dense_cols(); }

  /// Value of any column: tokens first, then dense.
  double value(std::size_t row, std::size_t c) const {
    if (c >= token_cols) return dense[row * dense_cols() + (c - token_cols)];
    auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[row]);
    auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[row + 1]);
    auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(c));
    return (it != e && *it == c) ? count[static_cast<std::size_t>(it - col.begin())] : 0.0;
  }

  void push_row(std::span<const std::pair<std::uint32_t, std::uint32_t>> tokens,
                std::span<const double> dense_values, RowProvenance prov, std::uint8_t label) {
    if (dense_values.size() != dense_cols()) throw Error("dense row width mismatch");
    for (const auto& [c, n] : tokens) {
      if (c >= token_cols) throw Error("token column out of range");
      col.push_back(c);
      count.push_back(n);
    }
    row_ptr.push_back(col.size());
    dense.insert(dense.end(), dense_values.begin(), dense_values.end());
    provenance.push_back(std::move(prov));
    labels.push_back(label);
  }

  /// Checks the structural invariants (used by tests and exporters).
  void check() const {
    if (labels.size() != rows() || provenance.size() != rows()) throw Error("row/label count mismatch");
    if (dense.size() != rows() * dense_cols()) throw Error("dense block size mismatch");
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
        if (col[i] >= token_cols) throw Error("token column out of range");
        if (i > row_ptr[r] && col[i - 1] >= col[i]) throw Error("row columns not strictly increasing");
      }
  }
};

// ---------------------------------------------------------------------------
// Chi-square selection

struct SelectionMask {
  int k = 0;
  std::vector<std::uint32_t> selected;  // ascending column indices
  std::vector<double> scores;           // one per scored column
};

enum class SelectionScope { kTokens, kAllColumns };

/// Chi-square statistic of each column against the binary label, treating
/// the summed column value per class as the observed count:
///   score_f = sum_c (O_cf - E_cf)^2 / E_cf,  E_cf = (n_c / n) * sum_c O_cf.
/// Columns with zero total score 0.
inline std::vector<double> chi2_scores(const FeatureMatrix& m, std::span<const std::uint8_t> labels,
                                       SelectionScope scope = SelectionScope::kTokens,
                                       std::span<const std::size_t> rows = {}) {
  const std::size_t ncols = scope == SelectionScope::kTokens ? m.token_cols : m.cols();
  std::vector<double> observed[2] = {std::vector<double>(ncols, 0.0), std::vector<double>(ncols, 0.0)};
  std::size_t class_rows[2] = {0, 0};
  auto visit = [&](std::size_t r) {
    const int c = labels[r] ? 1 : 0;
    ++class_rows[c];
    for (std::size_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i) observed[c][m.col[i]] += m.count[i];
    if (scope == SelectionScope::kAllColumns)
      for (std::size_t d = 0; d < m.dense_cols(); ++d) {
        const double v = m.dense[r * m.dense_cols() + d];
        if (v < 0) throw Error("chi2: negative feature value");
        observed[c][m.token_cols + d] += v;
      }
  };
  if (labels.size() != m.rows()) throw Error("chi2: label count mismatch");
  if (rows.empty())
    for (std::size_t r = 0; r < m.rows(); ++r) visit(r);
  else
    for (auto r : rows) visit(r);
  if (class_rows[0] == 0 || class_rows[1] == 0) throw Error("chi2: both classes must be present");

  const double n = static_cast<double>(class_rows[0] + class_rows[1]);
  std::vector<double> scores(ncols, 0.0);
  for (std::size_t f = 0; f < ncols; ++f) {
    const double total = observed[0][f] + observed[1][f];
    if (total <= 0) continue;
    double s = 0;
    for (int c = 0; c < 2; ++c) {
      const double expected = static_cast<double>(class_rows[c]) / n * total;
      const double d = observed[c][f] - expected;
      s += d * d / expected;
    }
    scores[f] = s;
  }
  return scores;
}

/// Top-k columns by score; ties go to the lower column index.
inline SelectionMask select_top_k(std::vector<double> scores, int k) {
  if (k < 1) throw Error("chi2_select: k must be >= 1");
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  order.resize(std::min<std::size_t>(static_cast<std::size_t>(k), order.size()));
  std::sort(order.begin(), order.end());
  return {k, std::move(order), std::move(scores)};
}

inline SelectionMask chi2_select(const FeatureMatrix& m, std::span<const std::uint8_t> labels, int k,
                                 SelectionScope scope = SelectionScope::kTokens,
                                 std::span<const std::size_t> rows = {}) {
  if (k < 1) throw Error("chi2_select: k must be >= 1");
  return select_top_k(chi2_scores(m, labels, scope, rows), k);
}

// ---------------------------------------------------------------------------
// Design matrix: what the forest consumes

/// CSR matrix of doubles. Missing entries are zero.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  explicit DesignMatrix(std::size_t n_cols) : n_cols_(n_cols) {}

  std::size_t rows() const noexcept { return row_ptr_.size() - 1; }
  std::size_t cols() const noexcept { return n_cols_; }

  void push_row(std::span<const std::pair<std::uint32_t, double>> entries) {
    for (const auto& [c, v] : entries) {
      if (c >= n_cols_) throw Error("design column out of range");
      if (v == 0.0) continue;
      col_.push_back(c);
      val_.push_back(v);
    }
    row_ptr_.push_back(col_.size());
  }

  double at(std::size_t row, std::size_t c) const noexcept {
    auto b = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    auto e = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(c));
    return (it != e && *it == c) ? val_[static_cast<std::size_t>(it - col_.begin())] : 0.0;
  }

  static DesignMatrix from_dense(std::size_t n_cols, std::span<const double> row_major) {
    DesignMatrix d(n_cols);
    std::vector<std::pair<std::uint32_t, double>> row;
    for (std::size_t r = 0; r * n_cols < row_major.size(); ++r) {
      row.clear();
      for (std::size_t c = 0; c < n_cols; ++c) row.emplace_back(static_cast<std::uint32_t>(c), row_major[r * n_cols + c]);
      d.push_row(row);
    }
    return d;
  }

 private:
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
};

/// Selected token columns (renumbered 0..|selected|-1) followed by every
/// dense column.
inline DesignMatrix project(const FeatureMatrix& m, const SelectionMask& mask) {
  std::vector<std::int64_t> remap(m.token_cols, -1);
  for (std::size_t i = 0; i < mask.selected.size(); ++i) remap[mask.selected[i]] = static_cast<std::int64_t>(i);
  const std::size_t k = mask.selected.size();
  DesignMatrix d(k + m.dense_cols());
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    row.clear();
    for (std::size_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i)
      if (remap[m.col[i]] >= 0) row.emplace_back(static_cast<std::uint32_t>(remap[m.col[i]]), m.count[i]);
    for (std::size_t c = 0; c < m.dense_cols(); ++c)
      row.emplace_back(static_cast<std::uint32_t>(k + c), m.dense[r * m.dense_cols() + c]);
    d.push_row(row);
  }
  return d;
}

// ---------------------------------------------------------------------------
// CSV export

/// Sparse triplets (row,col,count) for the token block.
inline void write_token_triplets_csv(std::ostream& out, const FeatureMatrix& m) {
  out << "row,col,count\n";
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t i = m.row_ptr[r]; i < m.row_ptr[r + 1]; ++i)
      out << r << ',' << m.col[i] << ',' << m.count[i] << '\n';
}

inline void write_dense_csv(std::ostream& out, const FeatureMatrix& m) {
  out << "row";
  for (const auto& n : m.dense_names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << r;
    for (std::size_t c = 0; c < m.dense_cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.dense[r * m.dense_cols() + c]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline void write_labels_csv(std::ostream& out, const FeatureMatrix& m) {
  out << "row,test_id,build_id,attempt_index,label\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& p = m.provenance[r];
    out << r << ',' << p.test_id << ',' << p.build_id << ',' << p.attempt_index << ','
        << static_cast<int>(m.labels[r]) << '\n';
  }
}

}  // namespace flakesift
