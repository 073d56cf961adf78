// Copyright 2026 The CausalSynth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAUSALSYNTH_ERROR_HPP_
#define CAUSALSYNTH_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace causalsynth {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors caused by malformed user input (network files, configs, datasets,
// assignments). The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class CycleError : public ValidationError {
 public:
  explicit CycleError(std::string node)
      : ValidationError("graph contains a cycle through node '" + node + "'"),
        node_(std::move(node)) {}
  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

class UnknownNode : public ValidationError {
 public:
  explicit UnknownNode(const std::string& name)
      : ValidationError("unknown node '" + name + "'") {}
};

class UnknownVariable : public ValidationError {
 public:
  explicit UnknownVariable(const std::string& name)
      : ValidationError("unknown variable '" + name + "'") {}
};

class UnknownState : public ValidationError {
 public:
  UnknownState(const std::string& variable, const std::string& state)
      : ValidationError("variable '" + variable + "' has no state '" + state +
                        "'") {}
};

class OverlapError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NodeSetMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SchemaMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingParentState : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NoiseOutOfRange : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IncompleteNoise : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyMismatchList : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PriorMissingVariable : public ValidationError {
 public:
  explicit PriorMissingVariable(const std::string& name)
      : ValidationError("channel prior has no entry for variable '" + name +
                        "'") {}
};

class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

class EmptySample : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyLog : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Positioned syntax error from the network parsers.
class SyntaxError : public ValidationError {
 public:
  SyntaxError(std::size_t line, std::size_t column, const std::string& expected)
      : ValidationError("syntax error at " + std::to_string(line) + ":" +
                        std::to_string(column) + ": expected " + expected),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SemanticError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed dataset / log files. `line` is 1-based, 0 when not applicable.
class FormatError : public ValidationError {
 public:
  FormatError(std::size_t line, const std::string& what)
      : ValidationError(line == 0 ? what
                                  : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structural problem in a JSON document; `path` locates it, e.g.
// $.variables[2].cpt[0].
class JsonSchemaError : public ValidationError {
 public:
  JsonSchemaError(std::string path, const std::string& what)
      : ValidationError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Failures of a realization channel, as opposed to verification failures.
class RealizerError : public Error {
 public:
  RealizerError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class NetworkError : public RealizerError {
 public:
  explicit NetworkError(const std::string& what) : RealizerError(what, true) {}
};

class AuthError : public RealizerError {
 public:
  explicit AuthError(const std::string& what) : RealizerError(what, false) {}
};

class RateLimited : public RealizerError {
 public:
  explicit RateLimited(const std::string& what) : RealizerError(what, true) {}
};

class MalformedResponse : public RealizerError {
 public:
  explicit MalformedResponse(const std::string& what)
      : RealizerError(what, false) {}
};

}  // namespace causalsynth

#endif  // CAUSALSYNTH_ERROR_HPP_
