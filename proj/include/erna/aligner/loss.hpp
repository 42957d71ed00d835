// erna/aligner/loss.hpp

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
#include <string>
#include <vector>

#include "erna/aligner/decode.hpp"
#include "erna/aligner/decoder.hpp"
#include "erna/aligner/lattice.hpp"
#include "erna/error.hpp"

// Alignment loss -log p(y|x) = -log sum_z prod_u p(z_u | ...).
//
// lattice-exact: the decoder (and LM) state at node (u, n) is the one after
//   reading [blank, y1..yn], so every node has one distribution and the
//   lattice sum is exact for this model.
// greedy-path: the decoder is run on its own argmax outputs, as at decoding
//   time; the U step distributions are then shared by every node of a row.

namespace erna {

enum class LossMode { kLatticeExact, kGreedyPath };

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "lattice-exact") return LossMode::kLatticeExact;
  if (s == "greedy-path") return LossMode::kGreedyPath;
  throw ConfigError("unknown loss mode '" + s + "' (expected lattice-exact or greedy-path)");
}

inline std::string to_string(LossMode m) {
  return m == LossMode::kLatticeExact ? "lattice-exact" : "greedy-path";
}

template <class Real>
struct RnaLoss {
  Var<Real> nll;
  /// Posterior-weighted (lattice-exact) or path (greedy-path) sum of output
  /// entropies; only set when requested.
  Var<Real> entropy;
  AlignmentLattice<Real> lattice;
  /// Greedy alignment the distributions were taken from (greedy-path only).
  LabelSeq alignment;
};

namespace detail {

inline void check_targets(std::size_t U, const LabelSeq& y, std::size_t L) {
  if (y.size() > U) throw InfeasibleError(U, y.size());
  for (Label l : y)
    if (l >= L)
      throw VocabularyError("target label " + std::to_string(l) + " outside vocabulary of " + std::to_string(L));
}

/// Row index u * M + m -> m for m in 0..M-1 (or -> u with `by_row`).
inline std::vector<std::size_t> lattice_rows(std::size_t U, std::size_t M, bool by_row) {
  std::vector<std::size_t> idx;
  idx.reserve(U * M);
  for (std::size_t u = 0; u < U; ++u)
    for (std::size_t m = 0; m < M; ++m) idx.push_back(by_row ? u : m);
  return idx;
}

}  // namespace detail

template <class Real>
RnaLoss<Real> rna_loss(Graph<Real>& g, const Var<Real>& h, const LabelSeq& y, const DecoderParams<Real>& dec,
                       LossMode mode, std::type_identity_t<const FusionModel<Real>*> fusion = nullptr, bool with_entropy = false) {
  if (h.shape().size() != 2 || h.shape()[1] != dec.enc_dim())
    throw ShapeError("rna_loss: encoder output " + to_string(h.shape()) + " vs decoder width " +
                     std::to_string(dec.enc_dim()));
  const std::size_t U = h.shape()[0], N = y.size(), M = N + 1, K = dec.num_units();
  detail::check_targets(U, y, dec.num_labels);
  for (Real v : h.value())
    if (std::isnan(v)) throw NumericError("rna_loss: NaN in encoder output");
  const bool fused = fusion && fusion->fp;
  RnaLoss<Real> r;
  Var<Real> logits;
  if (mode == LossMode::kLatticeExact) {
    if (dec.feed_blanks) throw ConfigError("lattice-exact loss needs a decoder that does not feed blanks");
    LabelSeq inputs{dec.blank()};
    inputs.insert(inputs.end(), y.begin(), y.end());
    auto s = ops::pair_rows(h, decoder_outputs(g, dec, inputs));
    Var<Real> h_lm;
    if (fused) h_lm = ops::gather_rows(lm_prefix_features(g, *fusion->lm, y), detail::lattice_rows(U, M, false));
    logits = output_logits(g, dec, s, fused ? &h_lm : nullptr, fusion);
  } else {
    r.alignment = greedy_decode(h.tensor(), dec, fusion).alignment;
    LabelSeq inputs{dec.blank()}, lm_inputs;
    std::vector<std::size_t> row(U), lm_row(U);
    for (std::size_t u = 0; u < U; ++u) {
      lm_row[u] = lm_inputs.size();
      row[u] = dec.feed_blanks ? u : lm_inputs.size();
      if (u + 1 == U) break;
      const Label z = r.alignment[u];
      if (dec.feed_blanks) inputs.push_back(z);
      if (z != dec.blank()) {
        lm_inputs.push_back(z);
        if (!dec.feed_blanks) inputs.push_back(z);
      }
    }
    auto c = ops::gather_rows(decoder_outputs(g, dec, inputs), row);
    auto s = ops::concat_cols(h, c);
    Var<Real> h_lm;
    if (fused) h_lm = ops::gather_rows(lm_prefix_features(g, *fusion->lm, lm_inputs), lm_row);
    logits = output_logits(g, dec, s, fused ? &h_lm : nullptr, fusion);
  }
  const bool per_node = mode == LossMode::kLatticeExact;
  auto logp = ops::log_softmax(logits);
  auto node_logp = per_node ? logp : ops::gather_rows(logp, detail::lattice_rows(U, M, true));
  auto logp3 = ops::reshape(node_logp, {U, M, K});
  r.nll = ops::lattice_nll(logp3, y, dec.blank(), &r.lattice);
  if (with_entropy) {
    auto ent = ops::softmax_entropy(logits);
    r.entropy = per_node ? ops::lattice_expected_reward(logp3, ops::reshape(ent, {U, M}), y, dec.blank())
                         : ops::sum(ent);
  }
  return r;
}

struct BruteForceResult {
  double nll = 0;
  std::size_t paths = 0;
};

inline constexpr std::size_t kBruteForceMaxSteps = 8;

/// Enumerates every length-U alignment that collapses to y and sums their
/// probabilities, stepping the decoder along each path (lattice-exact) or
/// reading the greedy run's fixed step distributions (greedy-path).
template <class Real>
BruteForceResult rna_loss_bruteforce(const Tensor<Real>& h, const LabelSeq& y, const DecoderParams<Real>& dec,
                                     LossMode mode, std::type_identity_t<const FusionModel<Real>*> fusion = nullptr) {
  detail::check_encoder_output(h);
  const std::size_t U = h.dim(0), N = y.size();
  if (U > kBruteForceMaxSteps)
    throw ConfigError("brute-force oracle refuses U=" + std::to_string(U) + " > " +
                      std::to_string(kBruteForceMaxSteps));
  detail::check_targets(U, y, dec.num_labels);
  std::vector<std::vector<Real>> fixed;
  if (mode == LossMode::kGreedyPath) fixed = greedy_decode(h, dec, fusion).step_logp;
  BruteForceResult r;
  double log_total = neg_inf<double>();
  LabelSeq z;
  // Chooses the symbol at step u given n labels emitted so far.
  auto visit = [&](auto&& self, std::size_t u, std::size_t n, const DecoderState<Real>& state, double score) -> void {
    if (u == U) {
      if (n != N) return;
      if (collapse_blanks(z, dec.blank()) != y) throw NumericError("oracle enumerated a wrong path");
      ++r.paths;
      log_total = log_add_exp(log_total, score);
      return;
    }
    for (int emit = 0; emit < 2; ++emit) {
      if (emit ? n == N : N - n == U - u) continue;
      const Label sym = emit ? y[n] : dec.blank();
      if (mode == LossMode::kGreedyPath) {
        z.push_back(sym);
        self(self, u + 1, n + emit, state, score + double(fixed[u][sym]));
      } else {
        const Label prev = u == 0 ? dec.blank() : z.back();
        auto step = decoder_step(dec, detail::step_row(h, u), prev, state, fusion);
        z.push_back(sym);
        self(self, u + 1, n + emit, step.state, score + double(step.logp[sym]));
      }
      z.pop_back();
    }
  };
  visit(visit, 0, 0, decoder_initial_state(dec, fusion), 0.0);
  r.nll = -log_total;
  return r;
}

}  // namespace erna
