// erna/numeric/optim.hpp

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
#include <map>
#include <span>
#include <vector>

#include "erna/numeric/graph.hpp"
#include "erna/numeric/random.hpp"

namespace erna {

inline constexpr double kGradClipNorm = 5.0;

/// SGD with global gradient-norm clipping. Frozen params are skipped.
/// momentum > 0 adds a heavy-ball velocity (v = mu v + g, w -= lr v).
template <class Real>
class Sgd {
 public:
  explicit Sgd(double lr, double clip = kGradClipNorm, double momentum = 0.0)
      : lr_(lr), clip_(clip), momentum_(momentum) {}

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  /// Applies one update and returns the gradient norm before clipping.
  double step(std::span<Param<Real>* const> params) {
    double sq = 0;
    for (const auto* p : params)
      if (!p->frozen)
        for (Real v : p->grad.data) sq += double(v) * double(v);
    const double norm = std::sqrt(sq);
    const double scale = (clip_ > 0 && norm > clip_) ? clip_ / norm : 1.0;
    const Real step = Real(lr_ * scale);
    for (auto* p : params) {
      if (p->frozen) continue;
      if (momentum_ > 0) {
        auto& v = velocity_[p];
        v.resize(p->value.size(), Real(0));
        const Real mu = Real(momentum_), s = Real(scale), lr = Real(lr_);
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] = mu * v[i] + s * p->grad.data[i];
          p->value.data[i] -= lr * v[i];
        }
        continue;
      }
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value.data[i] -= step * p->grad.data[i];
    }
    return norm;
  }

 private:
  double lr_;
  double clip_;
  double momentum_;
  std::map<const Param<Real>*, std::vector<Real>> velocity_;
};

/// Halves the learning rate once the dev loss has failed to improve on the
/// best value seen so far (by a relative margin) for `patience` consecutive
/// observations.
class PlateauHalving {
 public:
  explicit PlateauHalving(std::size_t patience = 1, double rel_margin = 1e-3)
      : patience_(patience ? patience : 1), margin_(rel_margin) {}

  /// Returns true when the rate was halved.
  template <class Real>
  bool observe(double dev_loss, Sgd<Real>& opt) {
    if (!has_best_ || dev_loss < best_ - margin_ * std::abs(best_)) {
      best_ = dev_loss;
      has_best_ = true;
      stale_ = 0;
      return false;
    }
    if (++stale_ < patience_) return false;
    stale_ = 0;
    opt.set_learning_rate(opt.learning_rate() * 0.5);
    return true;
  }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double margin_;
  std::size_t stale_ = 0;
  double best_ = 0;
  bool has_best_ = false;
};

/// Fisher-Yates with the portable integer helper.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_int(rng, 0, i - 1)]);
}

}  // namespace erna
