// erna/numeric/tensor.hpp

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

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "erna/error.hpp"

namespace erna {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array. Plain value type; differentiation happens on
/// Graph nodes that own a Tensor.
template <class Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), Real(0)) {}
  Tensor(Shape s, std::vector<Real> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape))
      throw ShapeError("tensor " + to_string(shape) + " needs " +
                       std::to_string(numel(shape)) + " values, got " +
                       std::to_string(data.size()));
  }

  static Tensor scalar(Real v) { return Tensor({}, {v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  /// Size of the last axis (1 for scalars).
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  /// Product of all axes except the last.
  std::size_t rows() const { return shape.empty() ? 1 : size() / cols(); }

  Real& operator[](std::size_t i) { return data[i]; }
  const Real& operator[](std::size_t i) const { return data[i]; }
  Real& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const Real& at(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
  }
};

/// log(exp(a) + exp(b)); -inf is the identity element.
template <class Real>
Real log_add_exp(Real a, Real b) {
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

template <class Real>
constexpr Real neg_inf() {
  return -std::numeric_limits<Real>::infinity();
}

}  // namespace erna
