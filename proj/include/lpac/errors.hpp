// Copyright 2026 The lpac-coverage Authors
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpac {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or input violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A container's magic bytes or structural header are not what the reader expects.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A tensor does not have the shape the architecture manifest requires.
class ShapeError : public Error {
 public:
  ShapeError(std::string tensor, const std::string& what)
      : Error("tensor '" + tensor + "': " + what), tensor_(std::move(tensor)) {}

  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

/// The stream ended before a complete record could be read.
class TruncatedError : public Error {
 public:
  using Error::Error;
};

/// A text input line could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace lpac
