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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "flakesift/error.hpp"
#include "flakesift/rational.hpp"
#include "flakesift/records_io.hpp"

namespace flakesift {

/// Positive class is "flaky"; negatives are fault-triggering failures.
struct ConfusionMatrix {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  void add(bool truth_flaky, bool predicted_flaky) noexcept {
    if (truth_flaky) (predicted_flaky ? tp : fn)++;
    else (predicted_flaky ? fp : tn)++;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

using Int128 = __int128;

inline Int128 gcd128(Int128 a, Int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const Int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline std::string int128_to_string(Int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  std::string s;
  while (v != 0) {
    const int digit = static_cast<int>(v % 10);
    s.insert(s.begin(), static_cast<char>('0' + (digit < 0 ? -digit : digit)));
    v /= 10;
  }
  return neg ? "-" + s : s;
}

/// MCC = numerator / sqrt(denominator_squared), kept exact:
///   numerator = TN*TP - FP*FN
///   denominator_squared = (TN+FN)(TP+FP)(TN+FP)(FN+TP)
/// Exact for counts up to about 10^9 per cell.
struct Mcc {
  Int128 numerator = 0;
  Int128 denominator_squared = 1;

  double value() const {
    return static_cast<double>(static_cast<long double>(numerator) /
                               std::sqrt(static_cast<long double>(denominator_squared)));
  }
  int sign() const noexcept { return numerator > 0 ? 1 : (numerator < 0 ? -1 : 0); }

  /// MCC^2 as a reduced fraction (num, den).
  std::pair<Int128, Int128> squared() const {
    const Int128 n2 = numerator * numerator;
    const Int128 g = gcd128(n2, denominator_squared);
    return {n2 / g, denominator_squared / g};
  }
};

struct MetricsReport {
  ConfusionMatrix confusion;
  std::optional<Rational> precision;  // TP / (TP + FP)
  std::optional<Rational> recall;     // TP / (TP + FN)
  std::optional<Rational> fpr;        // FP / (FP + TN)
  std::optional<Mcc> mcc;
};

/// Any metric whose denominator is zero is left undefined (never 0).
inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<Rational> {
    if (den == 0) return std::nullopt;
    return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
  };
  MetricsReport m;
  m.confusion = cm;
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  m.fpr = ratio(cm.fp, cm.fp + cm.tn);
  const Int128 tp = cm.tp, tn = cm.tn, fp = cm.fp, fn = cm.fn;
  const Int128 den = (tn + fn) * (tp + fp) * (tn + fp) * (fn + tp);
  if (den != 0) m.mcc = Mcc{tn * tp - fp * fn, den};
  return m;
}

inline Json rational_to_json(const std::optional<Rational>& r) {
  if (!r) return nullptr;
  return Json{{"value", r->to_double()}, {"fraction", r->str()}, {"percent", format_percent(*r)}};
}

inline Json metrics_to_json(const MetricsReport& m) {
  Json mcc = nullptr;
  if (m.mcc) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", m.mcc->value());
    mcc = Json{{"value", m.mcc->value()},
               {"display", buf},
               {"numerator", int128_to_string(m.mcc->numerator)},
               {"denominator_squared", int128_to_string(m.mcc->denominator_squared)}};
  }
  return Json{{"precision", rational_to_json(m.precision)},
              {"recall", rational_to_json(m.recall)},
              {"fpr", rational_to_json(m.fpr)},
              {"mcc", mcc},
              {"confusion",
               {{"tp", m.confusion.tp}, {"tn", m.confusion.tn}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn},
                {"positive_class", "flaky"}}}};
}

inline ConfusionMatrix confusion_from_json(const Json& j) {
  ConfusionMatrix cm;
  cm.tp = j.at("tp").get<std::uint64_t>();
  cm.tn = j.at("tn").get<std::uint64_t>();
  cm.fp = j.at("fp").get<std::uint64_t>();
  cm.fn = j.at("fn").get<std::uint64_t>();
  return cm;
}

}  // namespace flakesift
