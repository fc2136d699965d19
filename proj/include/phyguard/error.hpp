/*
 * Copyright 2026 The phyguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace phyguard {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Inconsistent or out-of-range configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input is well formed but too small to work with.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (bad dimensions, bad ranges).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A mobility scenario could not be placed inside its region.
class InfeasibleScenarioError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf during training or inference.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A required artifact (trained model, dataset) is missing.
class MissingPrerequisiteError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace phyguard
