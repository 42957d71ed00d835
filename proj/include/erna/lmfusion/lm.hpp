// erna/lmfusion/lm.hpp

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
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/features.hpp"
#include "erna/numeric/optim.hpp"
#include "erna/numeric/params.hpp"

// Character LSTM language model over the L real labels. Embedding row L is a
// learned start symbol, consumed once before the first character; blank
// never reaches the LM.

namespace erna {

template <class Real>
struct LMParams {
  std::size_t num_labels = 0;
  Param<Real>* embed = nullptr;  // [(L+1) x E], row L = start
  LstmParams<Real> lstm;
  Linear<Real> out;  // [H x L]

  static LMParams make(ParamSet<Real>& ps, const std::string& name, std::size_t L, std::size_t embed_dim,
                       std::size_t hidden, Rng& rng) {
    if (L == 0 || embed_dim == 0 || hidden == 0) throw ConfigError("lm: sizes must be >= 1");
    LMParams p;
    p.num_labels = L;
    p.embed = &add_uniform(ps, name + ".embed", {L + 1, embed_dim}, rng);
    p.lstm = LstmParams<Real>::make(ps, name + ".lstm", embed_dim, hidden, rng);
    p.out = Linear<Real>::make(ps, name + ".out", hidden, L, rng);
    return p;
  }
  Label start() const { return Label(num_labels); }
  std::size_t hidden() const { return lstm.hidden(); }
  std::size_t embed_dim() const { return embed->value.dim(1); }
};

template <class Real>
using LmState = LstmState<Real>;

/// State after consuming the start symbol.
template <class Real>
LmState<Real> lm_initial_state(const LMParams<Real>& lm) {
  return lstm_step(lm.lstm, lstm_zero_state<Real>(lm.hidden()),
                   lm.embed->value.data.data() + std::size_t(lm.start()) * lm.embed_dim());
}

/// Blank (id L) leaves the state untouched; a real label is consumed. The LM
/// feature h^LM is the returned state's `h`.
template <class Real>
LmState<Real> lm_state_advance(const LMParams<Real>& lm, const LmState<Real>& state, Label z_prev) {
  if (z_prev > lm.num_labels)
    throw VocabularyError("lm: symbol " + std::to_string(z_prev) + " outside [0, " +
                          std::to_string(lm.num_labels) + "]");
  if (z_prev == lm.num_labels) return state;
  return lstm_step(lm.lstm, state, lm.embed->value.data.data() + std::size_t(z_prev) * lm.embed_dim());
}

/// LM outputs after consuming [start, y1..ym] for m = 0..N: [(N+1) x H].
template <class Real>
Var<Real> lm_prefix_features(Graph<Real>& g, const LMParams<Real>& lm, const LabelSeq& y) {
  std::vector<std::size_t> idx{std::size_t(lm.start())};
  for (Label l : y) {
    if (l >= lm.num_labels) throw VocabularyError("lm: label " + std::to_string(l) + " out of range");
    idx.push_back(l);
  }
  return lm.lstm(g, ops::gather_rows(g.param(*lm.embed), std::move(idx)));
}

/// Summed next-character cross-entropy of y (N predictions).
template <class Real>
Var<Real> lm_sequence_loss(Graph<Real>& g, const LMParams<Real>& lm, const LabelSeq& y) {
  if (y.empty()) throw ConfigError("lm: empty transcript");
  const LabelSeq prefix(y.begin(), y.end() - 1);
  auto logp = ops::log_softmax(lm.out(g, lm_prefix_features(g, lm, prefix)));
  Tensor<Real> pick({y.size(), lm.num_labels});
  for (std::size_t i = 0; i < y.size(); ++i) pick.data[i * lm.num_labels + y[i]] = Real(-1);
  return ops::sum(ops::mul(logp, g.constant(std::move(pick))));
}

template <class Real>
double lm_perplexity(const LMParams<Real>& lm, std::span<const LabelSeq> corpus) {
  double nll = 0;
  std::size_t count = 0;
  for (const auto& y : corpus) {
    if (y.empty()) continue;
    Graph<Real> g;
    nll += double(lm_sequence_loss(g, lm, y).item());
    count += y.size();
  }
  if (count == 0) throw ConfigError("lm: empty evaluation corpus");
  return std::exp(nll / double(count));
}

struct LmTrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 0.5;
  std::uint64_t seed = 7;
};

struct LmTrainLog {
  std::vector<double> train_loss;  // mean per-character nll per epoch
  std::vector<double> dev_perplexity;
};

/// Next-character cross-entropy training with SGD. Only the LM's own params
/// are updated. `on_epoch` (optional) sees each epoch's index and log.
template <class Real, class OnEpoch>
LmTrainLog train_lm(LMParams<Real>& lm, const std::vector<Param<Real>*>& params,
                    const std::vector<LabelSeq>& train, const std::vector<LabelSeq>& dev,
                    const LmTrainConfig& cfg, OnEpoch&& on_epoch) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (!train[i].empty()) order.push_back(i);
  if (order.empty()) throw ConfigError("lm: empty training corpus");
  if (cfg.batch_size == 0) throw ConfigError("lm: batch size must be >= 1");
  const std::span<const LabelSeq> dev_span = dev.empty() ? std::span<const LabelSeq>(train) : dev;
  Rng rng(cfg.seed);
  Sgd<Real> opt(cfg.learning_rate);
  PlateauHalving plateau;
  LmTrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0;
    std::size_t chars = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      for (auto* p : params) p->zero_grad();
      std::size_t batch_chars = 0;
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      for (std::size_t i = s; i < e; ++i) batch_chars += train[order[i]].size();
      for (std::size_t i = s; i < e; ++i) {
        Graph<Real> g;
        const auto& y = train[order[i]];
        auto loss = lm_sequence_loss(g, lm, y);
        total += double(loss.item());
        g.backward(ops::scale(loss, Real(1.0 / double(batch_chars))));
      }
      chars += batch_chars;
      opt.step(params);
    }
    log.train_loss.push_back(total / double(chars));
    log.dev_perplexity.push_back(lm_perplexity(lm, dev_span));
    plateau.observe(std::log(log.dev_perplexity.back()), opt);
    on_epoch(epoch, log);
  }
  return log;
}

template <class Real>
LmTrainLog train_lm(LMParams<Real>& lm, const std::vector<Param<Real>*>& params,
                    const std::vector<LabelSeq>& train, const std::vector<LabelSeq>& dev,
                    const LmTrainConfig& cfg) {
  return train_lm(lm, params, train, dev, cfg, [](std::size_t, const LmTrainLog&) {});
}

}  // namespace erna
