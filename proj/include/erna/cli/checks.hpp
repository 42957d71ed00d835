// erna/cli/checks.hpp

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
#include <cstdint>
#include <string>

#include "erna/cli/model.hpp"
#include "erna/numeric/gradcheck.hpp"

// Self checks behind the gradcheck and oracle-check subcommands.

namespace erna {

/// Smallest model with every component switched on: conv front end, one MU
/// block, two LSTM layers with pooling, decoder, LM, fusion gate and the
/// confidence penalty at 0.2.
inline RunConfig gradcheck_config(std::uint64_t seed) {
  RunConfig c;
  c.input_dim = 4;
  c.vocab_size = 3;
  c.downsample = "conv-stride{2}+pooling{2}-width{2}";
  c.conv_channels = 2;
  c.mu_count = 1;
  c.lstm_layers = 2;
  c.lstm_cells = 2;
  c.row_conv_context = 2;
  c.decoder_embed = 2;
  c.decoder_cells = 3;
  c.lm_embed = 2;
  c.lm_cells = 2;
  c.fusion = true;
  c.confidence_penalty = 0.2;
  c.seed = seed;
  return c;
}

/// Central-difference check of the full training objective at eps = 1e-5.
inline GradCheckReport full_model_gradcheck(std::uint64_t seed, double eps = 1e-5) {
  Model<double> m(gradcheck_config(seed), {true, true, true});
  Rng rng(seed);
  // Weights well away from zero so every path carries gradient; layer-norm
  // gains keep their init.
  for (auto* p : m.params().all())
    if (p->name.find(".ln") == std::string::npos) fill_uniform(p->value, rng, -0.5, 0.5);
  Utterance u;
  u.features = FeatureMatrix(12, 4);
  for (auto& v : u.features.values) v = float(gaussian(rng));
  u.labels = {0, 2};
  auto f = [&](Graph<double>& g) { return m.loss(g, u).total; };
  const auto params = m.params().all();
  return grad_check<double>(f, params, eps);
}

struct OracleReport {
  std::size_t trials = 0;
  double max_abs_diff = 0;
  std::size_t worst_trial = 0;
};

/// Lattice-exact loss vs. path enumeration on random small problems
/// (U <= 5, N <= 3, L = 3), half of them with an LM fusion layer.
inline OracleReport lattice_oracle_check(std::size_t trials, std::uint64_t seed) {
  OracleReport r;
  Rng rng(seed);
  for (std::size_t i = 0; i < trials; ++i) {
    ParamSet<double> ps;
    const std::size_t H = 2;
    auto dec = DecoderParams<double>::make(ps, "dec", 3, H, 3, 4, rng);
    LMParams<double> lm;
    FusionParams<double> fp;
    const bool fused = i % 2 == 1;
    if (fused) {
      lm = LMParams<double>::make(ps, "lm", 3, 3, 3, rng);
      fp = FusionParams<double>::make(ps, "fusion", dec.out, 3, rng);
    }
    for (auto* p : ps.all()) fill_uniform(p->value, rng, -1.5, 1.5);
    FusionModel<double> fusion{&lm, &fp};
    const std::size_t U = uniform_int(rng, 1, 5);
    const std::size_t N = uniform_int(rng, 0, std::min<std::size_t>(3, U));
    Tensor<double> h({U, H});
    fill_uniform(h, rng, -1, 1);
    LabelSeq y;
    for (std::size_t n = 0; n < N; ++n) y.push_back(Label(uniform_int(rng, 0, 2)));
    Graph<double> g;
    const double dp =
        rna_loss(g, g.constant(h), y, dec, LossMode::kLatticeExact, fused ? &fusion : nullptr).nll.item();
    const double bf = rna_loss_bruteforce(h, y, dec, LossMode::kLatticeExact, fused ? &fusion : nullptr).nll;
    const double d = std::abs(dp - bf);
    if (!(d <= r.max_abs_diff)) {
      r.max_abs_diff = d;
      r.worst_trial = i;
    }
    ++r.trials;
  }
  return r;
}

}  // namespace erna
