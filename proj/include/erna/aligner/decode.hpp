// erna/aligner/decode.hpp

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
#include <span>
#include <vector>

#include "erna/aligner/decoder.hpp"
#include "erna/error.hpp"

namespace erna {

/// Drops blanks only; repeated labels stay.
inline LabelSeq collapse_blanks(const LabelSeq& z, Label blank) {
  LabelSeq out;
  for (Label s : z)
    if (s != blank) out.push_back(s);
  return out;
}

template <class Real>
struct Decoded {
  LabelSeq alignment;
  LabelSeq labels;
  double score = 0;  // sum of chosen per-step log-probs
  /// Per-step log-distributions along the alignment (greedy decoding only).
  std::vector<std::vector<Real>> step_logp;
};

namespace detail {

template <class Real>
std::span<const Real> step_row(const Tensor<Real>& h, std::size_t u) {
  return {h.data.data() + u * h.cols(), h.cols()};
}

template <class Real>
void check_encoder_output(const Tensor<Real>& h) {
  if (h.rank() != 2 || h.dim(0) == 0) throw ShapeError("decode: encoder output must be [U x d] with U >= 1, got " + to_string(h.shape));
}

}  // namespace detail

/// Feeds back the argmax symbol at every step; ties go to the lowest id.
template <class Real>
Decoded<Real> greedy_decode(const Tensor<Real>& h, const DecoderParams<Real>& dec,
                            std::type_identity_t<const FusionModel<Real>*> fusion = nullptr) {
  detail::check_encoder_output(h);
  Decoded<Real> d;
  auto state = decoder_initial_state(dec, fusion);
  Label prev = dec.blank();
  for (std::size_t u = 0; u < h.dim(0); ++u) {
    auto step = decoder_step(dec, detail::step_row(h, u), prev, state, fusion);
    Label best = 0;
    for (Label k = 1; k < step.logp.size(); ++k)
      if (step.logp[k] > step.logp[best]) best = k;
    d.alignment.push_back(best);
    d.score += double(step.logp[best]);
    d.step_logp.push_back(std::move(step.logp));
    state = std::move(step.state);
    prev = best;
  }
  d.labels = collapse_blanks(d.alignment, dec.blank());
  return d;
}

template <class Real>
struct Hypothesis {
  LabelSeq alignment;
  double score = 0;
  double last_logp = 0;
  DecoderState<Real> state;
};

/// Alignment-level beam search. Every hypothesis expands over all L+1
/// symbols and the best B survive; hypotheses with equal collapsed output
/// are not merged. Order: higher score, then higher last-step log-prob,
/// then lexicographically smaller alignment. Returns the final beam, best
/// first.
template <class Real>
std::vector<Hypothesis<Real>> beam_search(const Tensor<Real>& h, const DecoderParams<Real>& dec, std::size_t beam,
                                          std::type_identity_t<const FusionModel<Real>*> fusion = nullptr) {
  if (beam == 0) throw ConfigError("beam size must be >= 1");
  detail::check_encoder_output(h);
  const std::size_t K = dec.num_units();
  std::vector<Hypothesis<Real>> hyps(1);
  hyps[0].state = decoder_initial_state(dec, fusion);
  struct Candidate {
    std::size_t parent;
    Label symbol;
    double score;
    double logp;
  };
  for (std::size_t u = 0; u < h.dim(0); ++u) {
    std::vector<StepOutput<Real>> steps;
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      const Label prev = u == 0 ? dec.blank() : hyps[i].alignment.back();
      steps.push_back(decoder_step(dec, detail::step_row(h, u), prev, hyps[i].state, fusion));
      for (Label k = 0; k < K; ++k)
        cands.push_back({i, k, hyps[i].score + double(steps[i].logp[k]), double(steps[i].logp[k])});
    }
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.logp != b.logp) return a.logp > b.logp;
      if (a.parent != b.parent) return hyps[a.parent].alignment < hyps[b.parent].alignment;
      return a.symbol < b.symbol;
    };
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);
    std::vector<Hypothesis<Real>> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      Hypothesis<Real> nh;
      nh.alignment = hyps[c.parent].alignment;
      nh.alignment.push_back(c.symbol);
      nh.score = c.score;
      nh.last_logp = c.logp;
      nh.state = steps[c.parent].state;
      next.push_back(std::move(nh));
    }
    hyps = std::move(next);
  }
  return hyps;
}

template <class Real>
Decoded<Real> beam_decode(const Tensor<Real>& h, const DecoderParams<Real>& dec, std::size_t beam,
                          std::type_identity_t<const FusionModel<Real>*> fusion = nullptr) {
  auto hyps = beam_search(h, dec, beam, fusion);
  Decoded<Real> d;
  d.alignment = std::move(hyps.front().alignment);
  d.score = hyps.front().score;
  d.labels = collapse_blanks(d.alignment, dec.blank());
  return d;
}

}  // namespace erna
