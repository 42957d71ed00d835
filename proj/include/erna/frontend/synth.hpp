// erna/frontend/synth.hpp

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

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/features.hpp"
#include "erna/frontend/vocabulary.hpp"
#include "erna/numeric/random.hpp"

// Synthetic corpora for desk-scale experiments.
//
// Every label owns a random +-1 acoustic template. An utterance lays out its
// labels left to right, each held for at least `rate_denominator` frames and
// marked on its first frame by an onset channel, with silent gaps spread
// randomly in between. Gaussian noise and a per-speaker offset are added on
// top. Because every label spans a full down-sampled step, N <= ceil(T/rate)
// holds for every utterance.
//
// Optional structure for language-model experiments: `homophone_pairs`
// makes labels (0,1), (2,3), ... share templates, and `grammar_skew` draws
// each next label from a fixed successor table with that probability.

namespace erna {

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t train_count = 50;
  std::size_t dev_count = 20;
  std::size_t vocab_size = 8;
  std::size_t min_frames = 40;
  std::size_t max_frames = 80;
  std::size_t min_labels = 2;
  std::size_t max_labels = 5;
  std::size_t feature_dim = 16;
  std::size_t rate_denominator = 8;
  double noise = 0.3;
  std::size_t speakers = 4;
  double speaker_offset = 0.5;
  std::size_t homophone_pairs = 0;
  double grammar_skew = 0.0;
};

struct SynthCorpus {
  Vocabulary vocab;
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
};

namespace detail {

struct SynthWorld {
  std::vector<std::vector<float>> templates;     // per label, feature_dim - 1 values
  std::vector<std::vector<float>> speaker_bias;  // per speaker, feature_dim values
  std::vector<Label> successor;
};

inline SynthWorld make_world(const SynthConfig& c) {
  Rng rng(c.seed * 0x9E3779B97F4A7C15ull + 1);
  SynthWorld w;
  const std::size_t td = c.feature_dim - 1;
  for (std::size_t l = 0; l < c.vocab_size; ++l) {
    if (l % 2 == 1 && l / 2 < c.homophone_pairs) {
      w.templates.push_back(w.templates.back());
      continue;
    }
    std::vector<float> t(td);
    for (auto& v : t) v = uniform(rng, 0, 1) < 0.5 ? -1.0f : 1.0f;
    w.templates.push_back(std::move(t));
  }
  for (std::size_t s = 0; s < c.speakers; ++s) {
    std::vector<float> b(c.feature_dim);
    for (auto& v : b) v = float(c.speaker_offset * gaussian(rng));
    w.speaker_bias.push_back(std::move(b));
  }
  for (std::size_t l = 0; l < c.vocab_size; ++l)
    w.successor.push_back(Label(uniform_int(rng, 0, c.vocab_size - 1)));
  return w;
}

inline Utterance make_utterance(const SynthConfig& c, const SynthWorld& w, Rng& rng,
                                const std::string& id) {
  Utterance u;
  u.id = id;
  const std::size_t spk = uniform_int(rng, 0, c.speakers - 1);
  u.speaker = "spk" + std::to_string(spk);
  const std::size_t T = uniform_int(rng, c.min_frames, c.max_frames);
  const std::size_t N = uniform_int(rng, c.min_labels, c.max_labels);
  for (std::size_t n = 0; n < N; ++n) {
    Label l;
    if (n > 0 && c.grammar_skew > 0 && uniform(rng, 0, 1) < c.grammar_skew)
      l = w.successor[u.labels.back()];
    else
      l = Label(uniform_int(rng, 0, c.vocab_size - 1));
    u.labels.push_back(l);
  }
  // N label segments of rate frames each, the rest spread over N+1 gaps and
  // the segments themselves.
  std::vector<std::size_t> seg(N, c.rate_denominator), gap(N + 1, 0);
  for (std::size_t extra = T - N * c.rate_denominator; extra > 0; --extra) {
    const std::size_t slot = uniform_int(rng, 0, 2 * N);
    if (slot < N)
      ++seg[slot];
    else
      ++gap[slot - N];
  }
  FeatureMatrix& f = u.features;
  f = FeatureMatrix(T, c.feature_dim);
  std::size_t t = 0;
  auto silence = [&](std::size_t len) {
    for (std::size_t i = 0; i < len; ++i, ++t)
      for (std::size_t d = 0; d < c.feature_dim; ++d) f.at(t, d) = 0.0f;
  };
  for (std::size_t n = 0; n < N; ++n) {
    silence(gap[n]);
    for (std::size_t i = 0; i < seg[n]; ++i, ++t) {
      for (std::size_t d = 0; d + 1 < c.feature_dim; ++d) f.at(t, d) = w.templates[u.labels[n]][d];
      f.at(t, c.feature_dim - 1) = i == 0 ? 2.0f : 0.0f;
    }
  }
  silence(gap[N]);
  for (std::size_t r = 0; r < T; ++r)
    for (std::size_t d = 0; d < c.feature_dim; ++d)
      f.at(r, d) += float(c.noise * gaussian(rng)) + w.speaker_bias[spk][d];
  return u;
}

inline std::vector<Utterance> make_split(const SynthConfig& c, const SynthWorld& w,
                                         std::uint64_t stream, std::size_t count,
                                         const std::string& prefix) {
  Rng rng(c.seed * 0x9E3779B97F4A7C15ull + stream);
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%04zu", prefix.c_str(), i);
    out.push_back(make_utterance(c, w, rng, id));
  }
  return out;
}

}  // namespace detail

/// Deterministic per seed. Throws ConfigError when the ranges cannot fit
/// max_labels full-rate segments into min_frames.
inline SynthCorpus synth_dataset(const SynthConfig& c) {
  if (c.vocab_size == 0) throw ConfigError("synth: vocabulary must be non-empty");
  if (c.feature_dim < 2) throw ConfigError("synth: need at least 2 feature dims");
  if (c.speakers == 0) throw ConfigError("synth: need at least one speaker");
  if (c.rate_denominator == 0) throw ConfigError("synth: rate denominator must be >= 1");
  if (c.min_frames > c.max_frames || c.min_labels > c.max_labels || c.min_frames == 0)
    throw ConfigError("synth: empty frame or label range");
  if (c.max_labels * c.rate_denominator > c.min_frames)
    throw ConfigError("synth: infeasible ranges, " + std::to_string(c.max_labels) +
                      " labels at rate 1/" + std::to_string(c.rate_denominator) + " need " +
                      std::to_string(c.max_labels * c.rate_denominator) +
                      " frames but min_frames is " + std::to_string(c.min_frames));
  if (2 * c.homophone_pairs > c.vocab_size) throw ConfigError("synth: too many homophone pairs");
  const auto world = detail::make_world(c);
  SynthCorpus corpus;
  corpus.vocab = Vocabulary::of_size(c.vocab_size);
  corpus.train = detail::make_split(c, world, 2, c.train_count, "train");
  corpus.dev = detail::make_split(c, world, 3, c.dev_count, "dev");
  return corpus;
}

}  // namespace erna
