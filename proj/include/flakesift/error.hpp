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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flakesift {

/// Base of every error raised by the library. The CLI maps these to exit
/// code 2 (data or validation problem).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. Carries the 1-based line number when parsing a stream.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}
  /// Keeps the line number without adding another "line N:" prefix.
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An all-failing attempt sequence shorter than the rerun budget.
class TruncatedRerunsError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Two different contents were offered for the same build.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Raised by result fetchers when the backing service cannot be reached.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace flakesift
