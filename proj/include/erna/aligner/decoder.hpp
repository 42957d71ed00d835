// erna/aligner/decoder.hpp

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
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/features.hpp"
#include "erna/lmfusion/fusion.hpp"
#include "erna/lmfusion/lm.hpp"
#include "erna/numeric/params.hpp"

// Label decoder. A 1-layer LSTM reads label embeddings (blank included, id L)
// and the output layer scores L+1 units from s = [h_u; c], the encoder step
// concatenated with the decoder output.
//
// The first step consumes the blank embedding as the start symbol. After
// that the LSTM advances on non-blank symbols only, unless `feed_blanks` is
// set, in which case every previous symbol is fed back.

namespace erna {

template <class Real>
struct DecoderParams {
  std::size_t num_labels = 0;
  Param<Real>* embed = nullptr;  // [(L+1) x E]
  LstmParams<Real> lstm;
  Linear<Real> out;  // [(H + D) x (L+1)]
  bool feed_blanks = false;

  static DecoderParams make(ParamSet<Real>& ps, const std::string& name, std::size_t L, std::size_t enc_dim,
                            std::size_t embed_dim, std::size_t hidden, Rng& rng) {
    if (L == 0 || enc_dim == 0 || embed_dim == 0 || hidden == 0)
      throw ConfigError("decoder: sizes must be >= 1");
    DecoderParams p;
    p.num_labels = L;
    p.embed = &add_uniform(ps, name + ".embed", {L + 1, embed_dim}, rng);
    p.lstm = LstmParams<Real>::make(ps, name + ".lstm", embed_dim, hidden, rng);
    p.out = Linear<Real>::make(ps, name + ".out", enc_dim + hidden, L + 1, rng);
    return p;
  }
  Label blank() const { return Label(num_labels); }
  std::size_t num_units() const { return num_labels + 1; }
  std::size_t hidden() const { return lstm.hidden(); }
  std::size_t embed_dim() const { return embed->value.dim(1); }
  std::size_t enc_dim() const { return out.in_dim() - hidden(); }
};

template <class Real>
struct DecoderState {
  LstmState<Real> lstm;
  bool fresh = true;
  /// LM state, used only when decoding with fusion.
  LmState<Real> lm;
  std::size_t lm_advances = 0;

  bool operator==(const DecoderState&) const = default;
};

template <class Real>
DecoderState<Real> decoder_initial_state(const DecoderParams<Real>& dec, std::type_identity_t<const FusionModel<Real>*> fusion = nullptr) {
  DecoderState<Real> s;
  s.lstm = lstm_zero_state<Real>(dec.hidden());
  if (fusion && fusion->lm) {
    s.lm = lm_initial_state(*fusion->lm);
    s.lm_advances = 1;
  }
  return s;
}

template <class Real>
struct StepOutput {
  std::vector<Real> logp;  // L+1 log-probabilities
  DecoderState<Real> state;

  std::vector<Real> dist() const {
    std::vector<Real> p(logp.size());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logp[k]);
    return p;
  }
};

/// Max-shifted log-softmax of one row, same arithmetic as ops::log_softmax.
template <class Real>
void log_softmax_row(std::vector<Real>& row) {
  const Real mx = *std::max_element(row.begin(), row.end());
  Real z = 0;
  for (Real v : row) z += std::exp(v - mx);
  const Real lz = mx + std::log(z);
  for (auto& v : row) v -= lz;
}

/// One decoding step: feeds `prev` (blank at the first step) according to the
/// advance rule and returns log p(. | h_u, state) with the new state.
template <class Real>
StepOutput<Real> decoder_step(const DecoderParams<Real>& dec, std::span<const Real> h_u, Label prev,
                              const DecoderState<Real>& state, std::type_identity_t<const FusionModel<Real>*> fusion = nullptr) {
  if (prev > dec.num_labels)
    throw VocabularyError("decoder: previous symbol " + std::to_string(prev) + " outside [0, " +
                          std::to_string(dec.num_labels) + "]");
  if (h_u.size() != dec.enc_dim())
    throw ShapeError("decoder: encoder step has width " + std::to_string(h_u.size()) + ", expected " +
                     std::to_string(dec.enc_dim()));
  StepOutput<Real> r;
  r.state = state;
  if (state.fresh || prev != dec.blank() || dec.feed_blanks) {
    r.state.lstm = lstm_step(dec.lstm, state.lstm, dec.embed->value.data.data() + std::size_t(prev) * dec.embed_dim());
    r.state.fresh = false;
  }
  std::vector<Real> s(h_u.begin(), h_u.end());
  s.insert(s.end(), r.state.lstm.h.begin(), r.state.lstm.h.end());
  if (fusion && fusion->fp) {
    if (!state.fresh && prev != dec.blank()) {
      r.state.lm = lm_state_advance(*fusion->lm, state.lm, prev);
      ++r.state.lm_advances;
    }
    r.logp = fuse_row(s, r.state.lm.h, *fusion->fp);
  } else {
    r.logp = linear_row(dec.out, s);
  }
  log_softmax_row(r.logp);
  return r;
}

/// Decoder outputs after consuming the symbols `inputs` in order: [len x D].
template <class Real>
Var<Real> decoder_outputs(Graph<Real>& g, const DecoderParams<Real>& dec, const LabelSeq& inputs) {
  std::vector<std::size_t> idx(inputs.begin(), inputs.end());
  for (auto i : idx)
    if (i > dec.num_labels) throw VocabularyError("decoder: symbol " + std::to_string(i) + " out of range");
  return dec.lstm(g, ops::gather_rows(g.param(*dec.embed), std::move(idx)));
}

/// Output logits for rows s [R x (H + D)], plain or fused with h_lm [R x H_lm].
template <class Real>
Var<Real> output_logits(Graph<Real>& g, const DecoderParams<Real>& dec, const Var<Real>& s,
                        const Var<Real>* h_lm, std::type_identity_t<const FusionModel<Real>*> fusion) {
  if (fusion && fusion->fp) {
    if (!h_lm) throw UsageError("output_logits: fusion needs LM features");
    return fuse(g, s, *h_lm, *fusion->fp);
  }
  return dec.out(g, s);
}

}  // namespace erna
