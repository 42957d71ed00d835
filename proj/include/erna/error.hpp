// erna/error.hpp

// Copyright 2026  The erna authors

// See ../../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace erna {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (widths, strides, beam sizes, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated input files. Carries the byte offset (or line
/// number for text formats) where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// A label id outside the vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Target longer than the encoder output: no alignment exists.
class InfeasibleError : public Error {
 public:
  InfeasibleError(std::size_t steps, std::size_t labels)
      : Error("infeasible alignment: U=" + std::to_string(steps) +
              " encoder steps < N=" + std::to_string(labels) + " labels"),
        steps_(steps),
        labels_(labels) {}
  std::size_t steps() const { return steps_; }
  std::size_t labels() const { return labels_; }

 private:
  std::size_t steps_;
  std::size_t labels_;
};

/// API misuse, e.g. calling backward() on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace erna
