// erna/regularizer/penalty.hpp

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
#include <span>
#include <string>

#include "erna/error.hpp"
#include "erna/numeric/graph.hpp"
#include "erna/numeric/ops.hpp"

// Confidence penalty: L = nll - lambda * sum of output entropies. Which
// distributions enter the sum depends on the loss mode (see rna_loss): the
// greedy path's step distributions, or every lattice node weighted by its
// posterior occupancy.

namespace erna {

inline constexpr double kDefaultPenalty = 0.2;

struct PenaltyConfig {
  double lambda = 0.0;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw ConfigError("confidence penalty must be a finite value >= 0, got " + std::to_string(lambda));
  }
};

/// -sum p log p in nats with 0 log 0 = 0.
template <class Real>
Real entropy(std::span<const Real> dist) {
  Real sum = 0, h = 0;
  for (Real p : dist) {
    if (p < Real(0)) throw NumericError("entropy: negative probability " + std::to_string(double(p)));
    sum += p;
    if (p > Real(0)) h -= p * std::log(p);
  }
  if (std::abs(double(sum) - 1.0) > 1e-6)
    throw NumericError("entropy: distribution sums to " + std::to_string(double(sum)));
  return h;
}

inline double total_loss(double nll, std::span<const double> entropies, const PenaltyConfig& cfg) {
  cfg.validate();
  double s = 0;
  for (double h : entropies) s += h;
  return nll - cfg.lambda * s;
}

template <class Real>
Var<Real> total_loss(const Var<Real>& nll, const Var<Real>& entropy_sum, const PenaltyConfig& cfg) {
  cfg.validate();
  if (cfg.lambda == 0.0) return nll;
  return ops::sub(nll, ops::scale(entropy_sum, Real(cfg.lambda)));
}

}  // namespace erna
