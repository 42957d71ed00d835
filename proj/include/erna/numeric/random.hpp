// erna/numeric/random.hpp

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

#include <cstdint>
#include <random>

#include "erna/numeric/tensor.hpp"

namespace erna {

using Rng = std::mt19937_64;

// The standard distributions are implementation-defined; these helpers are
// not, so a seed gives the same numbers with every standard library.

/// Uniform in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
  const double unit = double(rng() >> 11) * (1.0 / 9007199254740992.0);
  return lo + (hi - lo) * unit;
}

/// Uniform integer in [lo, hi].
inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + std::size_t(rng() % std::uint64_t(hi - lo + 1));
}

/// Standard normal via Box-Muller.
inline double gaussian(Rng& rng) {
  double u1 = uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <class Real>
void fill_uniform(Tensor<Real>& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.data) v = Real(uniform(rng, lo, hi));
}

}  // namespace erna
