// erna/numeric/params.hpp

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
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "erna/error.hpp"
#include "erna/numeric/graph.hpp"
#include "erna/numeric/lstm.hpp"
#include "erna/numeric/ops.hpp"
#include "erna/numeric/random.hpp"

namespace erna {

/// Uniform init scale for weights without a more specific rule.
inline constexpr double kInitRange = 0.05;

/// Owns named Params in registration order. Addresses are stable, so modules
/// keep raw Param pointers into the set.
template <class Real>
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Param<Real>& add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    params_.push_back(std::make_unique<Param<Real>>(name, Tensor<Real>(std::move(shape))));
    index_[name] = params_.back().get();
    return *params_.back();
  }

  Param<Real>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }

  Param<Real>& at(const std::string& name) const {
    if (auto* p = find(name)) return *p;
    throw ConfigError("no parameter named " + name);
  }

  std::vector<Param<Real>*> all() const {
    std::vector<Param<Real>*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<Param<Real>*> with_prefix(std::string_view prefix) const {
    std::vector<Param<Real>*> out;
    for (const auto& p : params_)
      if (std::string_view(p->name).substr(0, prefix.size()) == prefix) out.push_back(p.get());
    return out;
  }

  std::vector<Param<Real>*> trainable() const {
    std::vector<Param<Real>*> out;
    for (const auto& p : params_)
      if (!p->frozen) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t size() const { return params_.size(); }

  /// Half-width of the uniform init used by add_uniform.
  double init_range() const { return init_range_; }
  void set_init_range(double r) { init_range_ = r; }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param<Real>>> params_;
  std::map<std::string, Param<Real>*> index_;
  double init_range_ = kInitRange;
};

template <class Real>
Param<Real>& add_uniform(ParamSet<Real>& ps, const std::string& name, Shape shape, Rng& rng) {
  auto& p = ps.add(name, std::move(shape));
  fill_uniform(p.value, rng, -ps.init_range(), ps.init_range());
  return p;
}

template <class Real>
Param<Real>& add_constant(ParamSet<Real>& ps, const std::string& name, Shape shape, Real value) {
  auto& p = ps.add(name, std::move(shape));
  std::fill(p.value.data.begin(), p.value.data.end(), value);
  return p;
}

/// y = x W + b with W [in x out].
template <class Real>
struct Linear {
  Param<Real>* w = nullptr;
  Param<Real>* b = nullptr;

  static Linear make(ParamSet<Real>& ps, const std::string& name, std::size_t in, std::size_t out,
                     Rng& rng) {
    Linear l;
    l.w = &add_uniform(ps, name + ".w", {in, out}, rng);
    l.b = &add_constant(ps, name + ".b", {out}, Real(0));
    return l;
  }
  std::size_t in_dim() const { return w->value.dim(0); }
  std::size_t out_dim() const { return w->value.dim(1); }

  Var<Real> operator()(Graph<Real>& g, const Var<Real>& x) const {
    return ops::add_bias(ops::matmul(x, g.param(*w)), g.param(*b));
  }
};

/// Gain/bias pair for layer normalization over a fixed width.
template <class Real>
struct LayerNormParams {
  Param<Real>* gain = nullptr;
  Param<Real>* bias = nullptr;

  static LayerNormParams make(ParamSet<Real>& ps, const std::string& name, std::size_t d) {
    return {&add_constant(ps, name + ".gain", {d}, Real(1)),
            &add_constant(ps, name + ".bias", {d}, Real(0))};
  }
  Var<Real> operator()(Graph<Real>& g, const Var<Real>& x) const {
    return ops::layer_norm(x, g.param(*gain), g.param(*bias));
  }
};

inline constexpr double kForgetBiasInit = 1.0;

/// One LSTM layer: gates ordered i, f, g, o. Forget-gate bias starts at 1.
template <class Real>
struct LstmParams {
  Param<Real>* wx = nullptr;
  Param<Real>* wh = nullptr;
  Param<Real>* b = nullptr;

  static LstmParams make(ParamSet<Real>& ps, const std::string& name, std::size_t in,
                         std::size_t hidden, Rng& rng) {
    LstmParams l;
    l.wx = &add_uniform(ps, name + ".wx", {in, 4 * hidden}, rng);
    l.wh = &add_uniform(ps, name + ".wh", {hidden, 4 * hidden}, rng);
    l.b = &add_constant(ps, name + ".b", {4 * hidden}, Real(0));
    for (std::size_t j = hidden; j < 2 * hidden; ++j) l.b->value.data[j] = Real(kForgetBiasInit);
    return l;
  }
  std::size_t hidden() const { return wh->value.dim(0); }
  std::size_t in_dim() const { return wx->value.dim(0); }
  LstmView<Real> view() const {
    return {wx->value.data.data(), wh->value.data.data(), b->value.data.data(), in_dim(), hidden()};
  }

  Var<Real> operator()(Graph<Real>& g, const Var<Real>& x, bool reverse = false) const {
    return ops::lstm_sequence(x, g.param(*wx), g.param(*wh), g.param(*b), reverse);
  }
};

/// Recurrent state for step-wise (non-recorded) LSTM evaluation.
template <class Real>
struct LstmState {
  std::vector<Real> h;
  std::vector<Real> c;
  bool operator==(const LstmState&) const = default;
};

template <class Real>
LstmState<Real> lstm_zero_state(std::size_t hidden) {
  return {std::vector<Real>(hidden, Real(0)), std::vector<Real>(hidden, Real(0))};
}

template <class Real>
LstmState<Real> lstm_step(const LstmParams<Real>& p, const LstmState<Real>& s,
                          const Real* x) {
  LstmState<Real> next = lstm_zero_state<Real>(p.hidden());
  std::vector<Real> gates(4 * p.hidden());
  lstm_cell_forward(p.view(), x, s.h.data(), s.c.data(), gates.data(), next.c.data(),
                    next.h.data());
  return next;
}

/// y = x W + b for a single row, with the same accumulation order as matmul.
template <class Real>
std::vector<Real> linear_row(const Linear<Real>& l, const std::vector<Real>& x) {
  const std::size_t in = l.in_dim(), out = l.out_dim();
  if (x.size() != in) throw ShapeError("linear_row: input width mismatch");
  std::vector<Real> y(out, Real(0));
  const auto& W = l.w->value.data;
  for (std::size_t k = 0; k < in; ++k)
    for (std::size_t j = 0; j < out; ++j) y[j] += x[k] * W[k * out + j];
  for (std::size_t j = 0; j < out; ++j) y[j] += l.b->value.data[j];
  return y;
}

}  // namespace erna
