// erna/lmfusion/fusion.hpp

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

#include <string>
#include <vector>

#include "erna/error.hpp"
#include "erna/lmfusion/lm.hpp"
#include "erna/numeric/params.hpp"

// Gated fusion of the decoder state s = [h_u; c] with the LM feature h^LM:
//
//   g   = sigmoid(W1 [s; h^LM] + b1)
//   s^F = [s; g * h^LM]
//   logits = W2 s^F + b2
//
// W2 replaces the plain output projection.

namespace erna {

template <class Real>
struct FusionParams {
  Linear<Real> gate;  // [(S + H) x H]
  Linear<Real> out;   // [(S + H) x K]

  /// W2's s-block and b2 start as copies of the base output layer and the LM
  /// block at zero, so the fused model initially scores like the base one.
  static FusionParams make(ParamSet<Real>& ps, const std::string& name, const Linear<Real>& base_out,
                           std::size_t lm_dim, Rng& rng) {
    const std::size_t S = base_out.in_dim(), K = base_out.out_dim();
    FusionParams p;
    p.gate = Linear<Real>::make(ps, name + ".gate", S + lm_dim, lm_dim, rng);
    p.out = Linear<Real>::make(ps, name + ".out", S + lm_dim, K, rng);
    p.init_from_base(base_out);
    return p;
  }
  /// Resets W2 and b2 to the base output layer (LM block zero).
  void init_from_base(const Linear<Real>& base_out) {
    if (base_out.in_dim() != state_dim() || base_out.out_dim() != out.out_dim())
      throw ShapeError("fusion: base output layer does not match fusion widths");
    auto& w = out.w->value.data;
    std::fill(w.begin(), w.end(), Real(0));
    std::copy(base_out.w->value.data.begin(), base_out.w->value.data.end(), w.begin());
    out.b->value.data = base_out.b->value.data;
  }
  std::size_t state_dim() const { return out.in_dim() - lm_dim(); }
  std::size_t lm_dim() const { return gate.out_dim(); }
};

/// Rows of s [R x S] and h^LM [R x H] to fused logits [R x K].
template <class Real>
Var<Real> fuse(Graph<Real>& g, const Var<Real>& s, const Var<Real>& h_lm, const FusionParams<Real>& fp) {
  if (s.shape().size() != 2 || h_lm.shape().size() != 2 || s.shape()[1] != fp.state_dim() ||
      h_lm.shape()[1] != fp.lm_dim() || s.shape()[0] != h_lm.shape()[0])
    throw ShapeError("fuse: s " + to_string(s.shape()) + " and h_lm " + to_string(h_lm.shape()) +
                     " do not match fusion widths " + std::to_string(fp.state_dim()) + "/" +
                     std::to_string(fp.lm_dim()));
  auto gate = ops::sigmoid(fp.gate(g, ops::concat_cols(s, h_lm)));
  return fp.out(g, ops::concat_cols(s, ops::mul(gate, h_lm)));
}

/// Single-row version with the same accumulation order as the graph ops.
template <class Real>
std::vector<Real> fuse_row(const std::vector<Real>& s, const std::vector<Real>& h_lm, const FusionParams<Real>& fp) {
  if (s.size() != fp.state_dim() || h_lm.size() != fp.lm_dim())
    throw ShapeError("fuse_row: widths " + std::to_string(s.size()) + "/" + std::to_string(h_lm.size()) +
                     " vs " + std::to_string(fp.state_dim()) + "/" + std::to_string(fp.lm_dim()));
  std::vector<Real> x = s;
  x.insert(x.end(), h_lm.begin(), h_lm.end());
  auto gate = linear_row(fp.gate, x);
  for (std::size_t j = 0; j < gate.size(); ++j) x[s.size() + j] = ops::detail::sigmoid(gate[j]) * h_lm[j];
  return linear_row(fp.out, x);
}

/// Borrowed LM + fusion weights for decoding and fusion training.
template <class Real>
struct FusionModel {
  const LMParams<Real>* lm = nullptr;
  const FusionParams<Real>* fp = nullptr;
};

}  // namespace erna
