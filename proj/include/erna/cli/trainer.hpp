// erna/cli/trainer.hpp

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

#include <functional>
#include <utility>
#include <vector>

#include "erna/cli/model.hpp"
#include "erna/metrics/cer.hpp"
#include "erna/numeric/optim.hpp"

// Mini-batch SGD over per-utterance graphs: every utterance in a batch gets
// its own tape, gradients are summed and scaled by 1/batch, then one clipped
// step is taken. No padding is involved.

namespace erna {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // mean total loss per training utterance
  double dev_loss = 0;    // mean nll per dev utterance
  double dev_cer = 0;     // greedy, percent
  double learning_rate = 0;
};

struct DevScore {
  double loss = 0;
  double cer = 0;
};

template <class Real>
DevScore evaluate(const Model<Real>& m, const std::vector<Utterance>& utts) {
  DevScore s;
  std::vector<std::pair<LabelSeq, LabelSeq>> pairs;
  std::size_t scored = 0;
  for (const auto& u : utts) {
    if (!m.feasible(u)) continue;
    Graph<Real> g;
    s.loss += double(m.loss(g, u).nll.item());
    ++scored;
    pairs.emplace_back(u.labels, m.decode(u.features, 1).labels);
  }
  if (scored == 0) return s;
  s.loss /= double(scored);
  s.cer = cer(pairs).cer;
  return s;
}

/// Utterances the model can align (N <= U), plus the number dropped.
template <class Real>
std::pair<std::vector<Utterance>, std::size_t> feasible_subset(const Model<Real>& m, const std::vector<Utterance>& utts) {
  std::vector<Utterance> out;
  for (const auto& u : utts)
    if (m.feasible(u)) out.push_back(u);
  return {std::move(out), utts.size() - out.size()};
}

/// Trains the params in `trainable` (others are left untouched even if not
/// frozen). Calls on_epoch after every epoch.
template <class Real>
std::vector<EpochLog> train_model(Model<Real>& m, const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
                                  const std::vector<Param<Real>*>& trainable,
                                  const std::function<void(const EpochLog&)>& on_epoch) {
  const auto& cfg = m.config();
  if (train.empty()) throw InfeasibleError(0, 0);
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ull + 404);
  Sgd<Real> opt(cfg.learning_rate, kGradClipNorm, cfg.momentum);
  PlateauHalving plateau(cfg.lr_patience);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<EpochLog> logs;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), s + cfg.batch_size);
      for (auto* p : trainable) p->zero_grad();
      for (std::size_t i = s; i < e; ++i) {
        Graph<Real> g;
        const Utterance* utt = &train[order[i]];
        Utterance jittered;
        if (cfg.speed_perturb > 0 || cfg.feature_noise > 0) {
          jittered = *utt;
          if (cfg.speed_perturb > 0) {
            const double f = uniform(rng, 1 - cfg.speed_perturb, 1 + cfg.speed_perturb);
            auto x = resample_frames(utt->features, f, uniform(rng, 0, 1));
            // A stretch that leaves too few encoder steps keeps the original.
            if (utt->labels.size() <= m.encoder().output_length(x.frames)) jittered.features = std::move(x);
          }
          if (cfg.feature_noise > 0)
            for (auto& v : jittered.features.values) v += float(cfg.feature_noise * gaussian(rng));
          utt = &jittered;
        }
        auto l = m.loss(g, *utt);
        total += double(l.total.item());
        g.backward(ops::scale(l.total, Real(1.0 / double(e - s))));
      }
      opt.step(trainable);
      m.set_step(m.step() + 1);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / double(train.size());
    const auto score = evaluate(m, dev.empty() ? train : dev);
    log.dev_loss = score.loss;
    log.dev_cer = score.cer;
    log.learning_rate = opt.learning_rate();
    plateau.observe(score.loss, opt);
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

/// Fusion phase: encoder, decoder and LM are frozen and only the gate and
/// fused output layer train, on the same objective as the base model.
template <class Real>
std::vector<EpochLog> train_fusion(Model<Real>& m, const std::vector<Utterance>& train, const std::vector<Utterance>& dev,
                                   const std::function<void(const EpochLog&)>& on_epoch) {
  if (!m.fusion()) throw ConfigError("train_fusion: model has no active fusion layer");
  for (auto* p : m.params().all()) p->frozen = p->name.rfind("fusion.", 0) != 0;
  return train_model(m, train, dev, m.params().trainable(), on_epoch);
}

}  // namespace erna
