// erna/numeric/gradcheck.hpp

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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "erna/error.hpp"
#include "erna/numeric/graph.hpp"

namespace erna {

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  std::size_t coordinates = 0;
};

/// Below this magnitude a gradient is compared in absolute terms; central
/// differences at eps = 1e-5 carry roundoff of roughly 1e-11 per unit of loss.
inline constexpr double kGradMagnitudeFloor = 1e-6;

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradMagnitudeFloor});
  return std::abs(analytic - numeric) / denom;
}

/// Evaluates `loss_fn` on a fresh graph and returns the scalar loss.
template <class Real, class LossFn>
Real evaluate_loss(LossFn& loss_fn) {
  Graph<Real> g;
  return loss_fn(g).item();
}

/// Central differences (f(p+eps) - f(p-eps)) / (2 eps) for every coordinate of
/// every param. Throws NumericError naming the coordinate if f is not finite.
template <class Real, class LossFn>
std::vector<std::vector<Real>> numeric_gradient(LossFn&& loss_fn,
                                                std::span<Param<Real>* const> params,
                                                Real eps) {
  if (!(eps > Real(0))) throw ConfigError("grad_check: eps must be > 0");
  std::vector<std::vector<Real>> out;
  for (Param<Real>* p : params) {
    std::vector<Real> grad(p->value.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const Real saved = p->value.data[i];
      p->value.data[i] = saved + eps;
      const Real plus = evaluate_loss<Real>(loss_fn);
      p->value.data[i] = saved - eps;
      const Real minus = evaluate_loss<Real>(loss_fn);
      p->value.data[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus))
        throw NumericError("grad_check: non-finite loss at " + p->name + "[" +
                           std::to_string(i) + "]");
      grad[i] = (plus - minus) / (Real(2) * eps);
    }
    out.push_back(std::move(grad));
  }
  return out;
}

/// Compares supplied analytic gradients with central differences.
template <class Real, class LossFn>
GradCheckReport compare_gradients(LossFn&& loss_fn,
                                  std::span<Param<Real>* const> params,
                                  const std::vector<std::vector<Real>>& analytic,
                                  Real eps) {
  const auto numeric = numeric_gradient<Real>(loss_fn, params, eps);
  GradCheckReport r;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < numeric[p].size(); ++i) {
      ++r.coordinates;
      const double e = relative_error(double(analytic[p][i]), double(numeric[p][i]));
      if (r.coordinates == 1 || e > r.max_rel_error) {
        r.max_rel_error = e;
        r.worst_param = params[p]->name;
        r.worst_index = i;
        r.analytic = double(analytic[p][i]);
        r.numeric = double(numeric[p][i]);
      }
    }
  return r;
}

/// Runs one backward pass of `loss_fn` (a callable Graph& -> scalar Var) and
/// checks every param's gradient against central differences. Param grads
/// are zeroed first and hold the analytic gradient afterwards.
template <class Real, class LossFn>
GradCheckReport grad_check(LossFn&& loss_fn, std::span<Param<Real>* const> params,
                           Real eps) {
  for (Param<Real>* p : params) p->zero_grad();
  {
    Graph<Real> g;
    auto loss = loss_fn(g);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    g.backward(loss);
  }
  std::vector<std::vector<Real>> analytic;
  for (Param<Real>* p : params) analytic.push_back(p->grad.data);
  return compare_gradients<Real>(loss_fn, params, analytic, eps);
}

}  // namespace erna
