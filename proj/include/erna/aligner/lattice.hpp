// erna/aligner/lattice.hpp

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
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/features.hpp"
#include "erna/numeric/graph.hpp"
#include "erna/numeric/tensor.hpp"

// Blank/label lattice over (t, n): t encoder steps consumed, n labels
// emitted. Step t+1 reads the distribution logp[t][n] and either emits blank
// (to (t+1, n)) or the next target label y[n] (to (t+1, n+1)).
//
//   alpha[0][0] = 0
//   alpha[t][n] = logaddexp(alpha[t-1][n]   + logp[t-1][n][blank],
//                           alpha[t-1][n-1] + logp[t-1][n-1][y[n-1]])
//   beta[U][N]  = 0
//   beta[t][n]  = logaddexp(logp[t][n][blank] + beta[t+1][n],
//                           logp[t][n][y[n]]  + beta[t+1][n+1])
//
// log p(y|x) = alpha[U][N] = beta[0][0].

namespace erna {

template <class Real>
struct AlignmentLattice {
  std::size_t U = 0;
  std::size_t N = 0;
  std::size_t K = 0;
  Label blank = 0;
  LabelSeq labels;
  /// [U x (N+1) x K] log-probabilities per node.
  Tensor<Real> logp;
  std::vector<Real> alpha_table;
  std::vector<Real> beta_table;

  Real alpha(std::size_t t, std::size_t n) const { return alpha_table[t * (N + 1) + n]; }
  Real beta(std::size_t t, std::size_t n) const { return beta_table[t * (N + 1) + n]; }
  Real& alpha(std::size_t t, std::size_t n) { return alpha_table[t * (N + 1) + n]; }
  Real& beta(std::size_t t, std::size_t n) { return beta_table[t * (N + 1) + n]; }
  Real lp(std::size_t t, std::size_t n, std::size_t k) const { return logp.data[(t * (N + 1) + n) * K + k]; }

  Real log_likelihood() const { return alpha(U, N); }

  bool reachable(std::size_t t, std::size_t n) const {
    return n <= N && n <= t && n + (U - t) >= N;
  }

  /// Log weight of the blank (emit = false) or label edge leaving (t, n),
  /// normalized by p(y|x): the edge posterior in log space.
  Real edge_log_posterior(std::size_t t, std::size_t n, bool emit) const {
    if (emit) return alpha(t, n) + lp(t, n, labels[n]) + beta(t + 1, n + 1) - log_likelihood();
    return alpha(t, n) + lp(t, n, blank) + beta(t + 1, n) - log_likelihood();
  }
};

namespace detail {

inline void check_lattice_shape(const Shape& shape, std::size_t N, Label blank) {
  if (shape.size() != 3 || shape[1] != N + 1 || shape[2] <= blank)
    throw ShapeError("lattice log-probs must be [U x (N+1) x K] with K > blank, got " + to_string(shape) +
                     " for N=" + std::to_string(N));
}

}  // namespace detail

/// Runs the forward and backward recursions over node log-probs.
template <class Real>
AlignmentLattice<Real> forward_backward(const Tensor<Real>& logp, const LabelSeq& y, Label blank) {
  const std::size_t N = y.size();
  detail::check_lattice_shape(logp.shape, N, blank);
  const std::size_t U = logp.dim(0);
  if (N > U) throw InfeasibleError(U, N);
  for (Real v : logp.data)
    if (std::isnan(v)) throw NumericError("NaN in lattice log-probabilities");
  for (Label l : y)
    if (l >= blank) throw VocabularyError("target label " + std::to_string(l) + " is blank or out of range");

  AlignmentLattice<Real> L;
  L.U = U;
  L.N = N;
  L.K = logp.dim(2);
  L.blank = blank;
  L.labels = y;
  L.logp = logp;
  const Real ninf = neg_inf<Real>();
  L.alpha_table.assign((U + 1) * (N + 1), ninf);
  L.beta_table.assign((U + 1) * (N + 1), ninf);
  L.alpha(0, 0) = 0;
  for (std::size_t t = 1; t <= U; ++t)
    for (std::size_t n = 0; n <= N; ++n) {
      if (!L.reachable(t, n)) continue;
      Real a = ninf;
      if (L.reachable(t - 1, n)) a = L.alpha(t - 1, n) + L.lp(t - 1, n, blank);
      if (n > 0 && L.reachable(t - 1, n - 1))
        a = log_add_exp(a, L.alpha(t - 1, n - 1) + L.lp(t - 1, n - 1, y[n - 1]));
      L.alpha(t, n) = a;
    }
  L.beta(U, N) = 0;
  for (std::size_t t = U; t-- > 0;)
    for (std::size_t n = 0; n <= N; ++n) {
      if (!L.reachable(t, n)) continue;
      Real b = ninf;
      if (L.reachable(t + 1, n)) b = L.lp(t, n, blank) + L.beta(t + 1, n);
      if (n < N && L.reachable(t + 1, n + 1)) b = log_add_exp(b, L.lp(t, n, y[n]) + L.beta(t + 1, n + 1));
      L.beta(t, n) = b;
    }
  return L;
}

namespace ops {

/// -log p(y|x) from node log-probs [U x (N+1) x K]. The gradient with respect
/// to logp[t][n][k] is minus the posterior of the edge that reads it.
/// Optionally hands back the lattice.
template <class Real>
Var<Real> lattice_nll(const Var<Real>& logp, const LabelSeq& y, Label blank,
                      AlignmentLattice<Real>* lattice_out = nullptr) {
  auto lat = forward_backward(logp.tensor(), y, blank);
  const Real nll = -lat.log_likelihood();
  if (!std::isfinite(nll)) throw NumericError("non-finite alignment loss");
  if (lattice_out) *lattice_out = lat;
  const std::size_t il = logp.id();
  return logp.graph().record(
      Tensor<Real>::scalar(nll), {logp}, [il, lat = std::move(lat)](Graph<Real>& g, std::size_t self) {
        const Real G = g.grad(self)[0];
        Real* gl = g.grad(il).data();
        const std::size_t M = lat.N + 1, K = lat.K;
        for (std::size_t t = 0; t < lat.U; ++t)
          for (std::size_t n = 0; n <= lat.N; ++n) {
            if (!lat.reachable(t, n)) continue;
            Real* row = gl + (t * M + n) * K;
            if (lat.reachable(t + 1, n)) row[lat.blank] -= G * std::exp(lat.edge_log_posterior(t, n, false));
            if (n < lat.N && lat.reachable(t + 1, n + 1))
              row[lat.labels[n]] -= G * std::exp(lat.edge_log_posterior(t, n, true));
          }
      });
}

/// Posterior expectation of sum_t reward[t][n_t] over alignments, i.e.
/// sum over non-final nodes of occupancy(t, n) * reward[t][n], where the
/// occupancy itself is differentiated through. reward is [U x (N+1)].
///
/// With a(.) the expected prefix reward of paths reaching a node and b(.)
/// the expected suffix reward leaving it, an edge e = (src -> dst) with
/// posterior q_e contributes
///   dE/dlogp_e   = q_e * (a(src) + r_src + b(dst) - E)
///   dE/dreward   = node occupancy.
template <class Real>
Var<Real> lattice_expected_reward(const Var<Real>& logp, const Var<Real>& reward, const LabelSeq& y,
                                  Label blank) {
  auto lat = forward_backward(logp.tensor(), y, blank);
  const std::size_t U = lat.U, N = lat.N, M = N + 1;
  if (reward.shape() != Shape{U, M})
    throw ShapeError("lattice reward must be [U x (N+1)], got " + to_string(reward.shape()));
  const auto& R = reward.value();
  const Real ll = lat.log_likelihood();
  if (!std::isfinite(ll)) throw NumericError("non-finite alignment likelihood");
  std::vector<Real> a((U + 1) * M, Real(0)), b((U + 1) * M, Real(0)), occ(U * M, Real(0));
  for (std::size_t t = 1; t <= U; ++t)
    for (std::size_t n = 0; n <= N; ++n) {
      if (!lat.reachable(t, n)) continue;
      Real s = 0;
      if (lat.reachable(t - 1, n))
        s += std::exp(lat.alpha(t - 1, n) + lat.lp(t - 1, n, blank) - lat.alpha(t, n)) *
             (a[(t - 1) * M + n] + R[(t - 1) * M + n]);
      if (n > 0 && lat.reachable(t - 1, n - 1))
        s += std::exp(lat.alpha(t - 1, n - 1) + lat.lp(t - 1, n - 1, y[n - 1]) - lat.alpha(t, n)) *
             (a[(t - 1) * M + n - 1] + R[(t - 1) * M + n - 1]);
      a[t * M + n] = s;
    }
  for (std::size_t t = U; t-- > 0;)
    for (std::size_t n = 0; n <= N; ++n) {
      if (!lat.reachable(t, n)) continue;
      Real s = 0;
      if (lat.reachable(t + 1, n))
        s += std::exp(lat.lp(t, n, blank) + lat.beta(t + 1, n) - lat.beta(t, n)) * (R[t * M + n] + b[(t + 1) * M + n]);
      if (n < N && lat.reachable(t + 1, n + 1))
        s += std::exp(lat.lp(t, n, y[n]) + lat.beta(t + 1, n + 1) - lat.beta(t, n)) *
             (R[t * M + n] + b[(t + 1) * M + n + 1]);
      b[t * M + n] = s;
      occ[t * M + n] = std::exp(lat.alpha(t, n) + lat.beta(t, n) - ll);
    }
  const Real expected = a[U * M + N];
  const std::size_t il = logp.id(), ir = reward.id();
  return logp.graph().record(
      Tensor<Real>::scalar(expected), {logp, reward},
      [il, ir, lat = std::move(lat), a = std::move(a), b = std::move(b), occ = std::move(occ), R, expected](
          Graph<Real>& g, std::size_t self) {
        const Real G = g.grad(self)[0];
        const std::size_t U = lat.U, N = lat.N, M = N + 1, K = lat.K;
        if (Real* gr = g.grad_if(ir))
          for (std::size_t i = 0; i < U * M; ++i) gr[i] += G * occ[i];
        Real* gl = g.grad_if(il);
        if (!gl) return;
        for (std::size_t t = 0; t < U; ++t)
          for (std::size_t n = 0; n <= N; ++n) {
            if (!lat.reachable(t, n)) continue;
            const Real prefix = a[t * M + n] + R[t * M + n];
            Real* row = gl + (t * M + n) * K;
            if (lat.reachable(t + 1, n))
              row[lat.blank] += G * std::exp(lat.edge_log_posterior(t, n, false)) *
                                (prefix + b[(t + 1) * M + n] - expected);
            if (n < N && lat.reachable(t + 1, n + 1))
              row[lat.labels[n]] += G * std::exp(lat.edge_log_posterior(t, n, true)) *
                                    (prefix + b[(t + 1) * M + n + 1] - expected);
          }
      });
}

}  // namespace ops
}  // namespace erna
