// erna/cli/model.hpp

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

#include <memory>
#include <vector>

#include "erna/aligner/decode.hpp"
#include "erna/aligner/loss.hpp"
#include "erna/cli/config.hpp"
#include "erna/encoder/encoder.hpp"
#include "erna/lmfusion/fusion.hpp"
#include "erna/lmfusion/lm.hpp"
#include "erna/regularizer/penalty.hpp"

namespace erna {

/// Which parameter groups a model (or checkpoint) carries.
struct ModelParts {
  bool acoustic = true;  // encoder + decoder
  bool lm = false;
  bool fusion = false;

  bool operator==(const ModelParts&) const = default;
};

/// Encoder, decoder and optionally the LM and fusion layer, all registered in
/// one ParamSet with prefixes "enc.", "dec.", "lm." and "fusion.". Each group
/// draws its init from its own seeded stream, so e.g. the LM is the same
/// whether or not the acoustic model is built alongside it.
template <class Real>
class Model {
 public:
  Model(const RunConfig& cfg, ModelParts parts) : cfg_(cfg), parts_(parts) {
    cfg_.validate();
    if (parts.fusion && !(parts.acoustic && parts.lm)) throw ConfigError("fusion needs the acoustic model and an LM");
    ps_.set_init_range(cfg.init_range);
    const std::uint64_t base = cfg.seed * 0x9E3779B97F4A7C15ull;
    if (parts.acoustic) {
      Rng rng(base + 101);
      enc_ = std::make_unique<Encoder<Real>>(cfg.encoder(), ps_, rng, "enc");
      dec_ = DecoderParams<Real>::make(ps_, "dec", cfg.vocab_size, enc_->output_dim(), cfg.decoder_embed,
                                       cfg.decoder_cells, rng);
      dec_.feed_blanks = cfg.feed_blanks;
    }
    if (parts.lm) {
      Rng rng(base + 202);
      lm_ = LMParams<Real>::make(ps_, "lm", cfg.vocab_size, cfg.lm_embed, cfg.lm_cells, rng);
    }
    if (parts.fusion) {
      Rng rng(base + 303);
      fp_ = FusionParams<Real>::make(ps_, "fusion", dec_.out, cfg.lm_cells, rng);
    }
    fusion_ = {&lm_, &fp_};
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const RunConfig& config() const { return cfg_; }
  RunConfig& mutable_config() { return cfg_; }
  const ModelParts& parts() const { return parts_; }
  ParamSet<Real>& params() { return ps_; }
  const ParamSet<Real>& params() const { return ps_; }
  const Encoder<Real>& encoder() const { return *enc_; }
  const DecoderParams<Real>& decoder() const { return dec_; }
  const LMParams<Real>& lm() const { return lm_; }
  LMParams<Real>& mutable_lm() { return lm_; }
  const FusionParams<Real>& fusion_params() const { return fp_; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  /// Re-copies the decoder output layer into the fusion layer, e.g. after the
  /// acoustic weights were loaded from a checkpoint.
  void reset_fusion_from_decoder() {
    if (!parts_.fusion) throw ConfigError("model has no fusion layer");
    fp_.init_from_base(dec_.out);
  }

  /// Fusion weights when fusion is present and switched on, else null.
  const FusionModel<Real>* fusion() const { return parts_.fusion && cfg_.fusion ? &fusion_ : nullptr; }

  Tensor<Real> encode(const FeatureMatrix& x) const {
    Graph<Real> g;
    return enc_->encode(g, x).tensor();
  }

  /// Greedy for beam 1, alignment-level beam search otherwise.
  Decoded<Real> decode(const FeatureMatrix& x, std::size_t beam) const {
    const auto h = encode(x);
    return beam <= 1 ? greedy_decode(h, dec_, fusion()) : beam_decode(h, dec_, beam, fusion());
  }

  struct Loss {
    Var<Real> total;
    Var<Real> nll;
    Var<Real> entropy;
  };

  /// nll - lambda * entropy for one utterance on graph g.
  Loss loss(Graph<Real>& g, const Utterance& utt) const {
    const bool want_entropy = cfg_.confidence_penalty > 0;
    auto r = rna_loss(g, enc_->encode(g, utt.features), utt.labels, dec_, cfg_.mode(), fusion(), want_entropy);
    Loss l{r.nll, r.nll, r.entropy};
    if (want_entropy) l.total = total_loss(r.nll, r.entropy, cfg_.penalty());
    return l;
  }

  bool feasible(const Utterance& utt) const {
    return utt.labels.size() <= enc_->output_length(utt.features.frames);
  }

 private:
  RunConfig cfg_;
  ModelParts parts_;
  ParamSet<Real> ps_;
  std::unique_ptr<Encoder<Real>> enc_;
  DecoderParams<Real> dec_;
  LMParams<Real> lm_;
  FusionParams<Real> fp_;
  FusionModel<Real> fusion_;
  std::uint64_t step_ = 0;
};

/// Mean entropy (nats) of the greedy per-step output distributions.
template <class Real>
double mean_output_entropy(const Model<Real>& m, const std::vector<Utterance>& utts) {
  double sum = 0;
  std::size_t steps = 0;
  for (const auto& u : utts) {
    const auto d = greedy_decode(m.encode(u.features), m.decoder(), m.fusion());
    for (const auto& lp : d.step_logp) {
      for (Real v : lp) sum -= double(std::exp(v)) * double(v);
      ++steps;
    }
  }
  return steps ? sum / double(steps) : 0.0;
}

}  // namespace erna
