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

#include <compare>
#include <cstdint>
#include <numeric>
#include <string>

#include "flakesift/error.hpp"

namespace flakesift {

/// Exact non-negative-denominator fraction, always stored in lowest terms.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw Error("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    num_ = num / g;
    den_ = den / g;
  }

  constexpr std::int64_t num() const noexcept { return num_; }
  constexpr std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }
  std::string str() const { return std::to_string(num_) + "/" + std::to_string(den_); }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Renders num/den scaled by 10^scale_digits with the given number of
/// decimals, rounding half to even. Exact: no floating point involved.
inline std::string format_fixed(const Rational& r, int decimals, int scale_digits = 0) {
  if (decimals < 0 || decimals + scale_digits > 12) throw Error("format_fixed: bad precision");
  __int128 scale = 1;
  for (int i = 0; i < decimals + scale_digits; ++i) scale *= 10;
  const bool negative = r.num() < 0;
  const __int128 num = static_cast<__int128>(negative ? -r.num() : r.num()) * scale;
  const __int128 den = r.den();
  __int128 q = num / den;
  const __int128 rem = num % den;
  if (2 * rem > den || (2 * rem == den && q % 2 == 1)) ++q;

  __int128 unit = 1;
  for (int i = 0; i < decimals; ++i) unit *= 10;
  const auto whole = static_cast<std::int64_t>(q / unit);
  auto frac = static_cast<std::int64_t>(q % unit);
  std::string out = (negative && q != 0 ? "-" : "") + std::to_string(whole);
  if (decimals > 0) {
    std::string digits = std::to_string(frac);
    out += "." + std::string(static_cast<std::size_t>(decimals) - digits.size(), '0') + digits;
  }
  return out;
}

/// "99.2%" style rendering of a fraction in [0, 1].
inline std::string format_percent(const Rational& r, int decimals = 1) {
  return format_fixed(r, decimals, 2) + "%";
}

}  // namespace flakesift
