// erna/encoder/encoder.hpp

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

#include <cstddef>
#include <string>
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/downsample.hpp"
#include "erna/frontend/features.hpp"
#include "erna/numeric/graph.hpp"
#include "erna/numeric/ops.hpp"
#include "erna/numeric/params.hpp"

// Acoustic encoder: features [T x F] -> h [U x d].
//
//   optional frame stacking
//   -> conv layers (3x3, time stride from the spec, frequency stride 2,
//      bias, layer norm, ReLU), channels c0, 2 c0, 4 c0, ...
//   -> Multiplicative Unit blocks
//   -> flatten frequency x channels
//   -> per LSTM layer: (Bi)LSTM -> linear projection -> ReLU -> layer norm
//      -> optional max pooling
//   -> forward-only mode: row convolution with C future frames on the output
//
// In forward-only mode the row convolution sits after the last pooling so
// its C frames of lookahead are counted at the output resolution.

namespace erna {

struct EncoderConfig {
  std::size_t input_dim = 40;
  DownsampleSpec downsample;
  std::size_t conv_channels = 64;
  std::size_t mu_count = 1;
  std::size_t lstm_layers = 4;
  std::size_t lstm_cells = 320;
  bool bidirectional = true;
  /// 0 means "same width as the LSTM output".
  std::size_t projection_dim = 0;
  std::size_t row_conv_context = 4;

  std::size_t lstm_output_dim() const { return bidirectional ? 2 * lstm_cells : lstm_cells; }
  std::size_t output_dim() const { return projection_dim ? projection_dim : lstm_output_dim(); }

  void validate() const {
    if (input_dim == 0) throw ConfigError("encoder: input_dim must be >= 1");
    if (lstm_layers == 0 || lstm_cells == 0) throw ConfigError("encoder: need at least one LSTM layer and cell");
    if (!downsample.conv_strides.empty() && conv_channels == 0)
      throw ConfigError("encoder: conv_channels must be >= 1");
    if (downsample.max_pooling_layer() > lstm_layers)
      throw ConfigError("encoder: pooling after LSTM layer " +
                        std::to_string(downsample.max_pooling_layer()) + " but only " +
                        std::to_string(lstm_layers) + " layers configured");
  }
};

inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kConvFreqStride = 2;

/// Weights of one Multiplicative Unit on a [T x F x c] map.
template <class Real>
struct MUParams {
  Param<Real>* w[4] = {};          // 3x3 kernels [3 x 3 x c x c]
  Param<Real>* b[5] = {};          // per-channel biases [c]
  LayerNormParams<Real> norm[4];   // over F*c, one per pre-activation
  bool layer_norm = true;

  static MUParams make(ParamSet<Real>& ps, const std::string& name, std::size_t freq,
                       std::size_t channels, Rng& rng) {
    MUParams p;
    for (int i = 0; i < 4; ++i)
      p.w[i] = &add_uniform(ps, name + ".w" + std::to_string(i + 1),
                            {kConvKernel, kConvKernel, channels, channels}, rng);
    for (int i = 0; i < 5; ++i)
      p.b[i] = &add_constant(ps, name + ".b" + std::to_string(i + 1), {channels}, Real(0));
    for (int i = 0; i < 4; ++i)
      p.norm[i] = LayerNormParams<Real>::make(ps, name + ".ln" + std::to_string(i + 1), freq * channels);
    return p;
  }
};

/// MU(I) = g1 * tanh(g2 * I + g3 * u + b5) with g1..g3 = sigmoid and
/// u = tanh of LN(W_k * I + b_k). Shape preserving.
template <class Real>
Var<Real> mu_forward(Graph<Real>& g, const Var<Real>& input, const MUParams<Real>& p) {
  const auto& shape = input.shape();
  if (shape.size() != 3) throw ShapeError("mu_forward expects [T x F x c], got " + to_string(shape));
  const std::size_t T = shape[0], F = shape[1], c = shape[2];
  if (p.w[0]->value.dim(2) != c || p.w[0]->value.dim(3) != c)
    throw ShapeError("mu_forward: kernels " + to_string(p.w[0]->value.shape) + " vs input channels " +
                     std::to_string(c));
  Var<Real> act[4];
  for (int i = 0; i < 4; ++i) {
    auto pre = ops::add_bias(ops::conv2d(input, g.param(*p.w[i]), 1, 1), g.param(*p.b[i]));
    if (p.layer_norm) pre = ops::reshape(p.norm[i](g, ops::reshape(pre, {T, F * c})), {T, F, c});
    act[i] = i < 3 ? ops::sigmoid(pre) : ops::tanh(pre);
  }
  auto inner = ops::add(ops::mul(act[1], input), ops::mul(act[2], act[3]));
  return ops::mul(act[0], ops::tanh(ops::add_bias(inner, g.param(*p.b[4]))));
}

template <class Real>
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, ParamSet<Real>& ps, Rng& rng, const std::string& prefix = "enc")
      : cfg_(cfg) {
    cfg_.validate();
    const auto& ds = cfg_.downsample;
    std::size_t freq = cfg_.input_dim * ds.stack;
    std::size_t channels = 1;
    for (std::size_t i = 0; i < ds.conv_strides.size(); ++i) {
      const std::size_t out_ch = cfg_.conv_channels << i;
      const std::size_t out_freq = (freq + kConvFreqStride - 1) / kConvFreqStride;
      const std::string n = prefix + ".conv" + std::to_string(i + 1);
      ConvLayer layer;
      layer.kernel = &add_uniform(ps, n + ".w", {kConvKernel, kConvKernel, channels, out_ch}, rng);
      layer.bias = &add_constant(ps, n + ".b", {out_ch}, Real(0));
      layer.norm = LayerNormParams<Real>::make(ps, n + ".ln", out_freq * out_ch);
      layer.stride = ds.conv_strides[i];
      conv_.push_back(layer);
      freq = out_freq;
      channels = out_ch;
    }
    for (std::size_t i = 0; i < cfg_.mu_count; ++i)
      mu_.push_back(MUParams<Real>::make(ps, prefix + ".mu" + std::to_string(i + 1), freq, channels, rng));
    std::size_t in = freq * channels;
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
      const std::string n = prefix + ".lstm" + std::to_string(l + 1);
      RecurrentLayer layer;
      layer.fwd = LstmParams<Real>::make(ps, n + ".fwd", in, cfg_.lstm_cells, rng);
      if (cfg_.bidirectional)
        layer.bwd = LstmParams<Real>::make(ps, n + ".bwd", in, cfg_.lstm_cells, rng);
      const std::string pn = prefix + ".proj" + std::to_string(l + 1);
      layer.proj = Linear<Real>::make(ps, pn, cfg_.lstm_output_dim(), cfg_.output_dim(), rng);
      layer.norm = LayerNormParams<Real>::make(ps, pn + ".ln", cfg_.output_dim());
      for (const auto& pool : ds.pooling)
        if (pool.after_layer == l + 1) layer.pool_width = pool.width;
      lstm_.push_back(layer);
      in = cfg_.output_dim();
    }
    if (!cfg_.bidirectional) {
      row_conv_ = &add_uniform(ps, prefix + ".rowconv", {cfg_.row_conv_context + 1, cfg_.output_dim()}, rng);
      for (std::size_t k = 0; k < cfg_.output_dim(); ++k) row_conv_->value.data[k] += Real(1);
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  std::size_t output_dim() const { return cfg_.output_dim(); }
  std::size_t output_length(std::size_t frames) const { return cfg_.downsample.output_length(frames); }
  const std::vector<MUParams<Real>>& mu_blocks() const { return mu_; }
  Param<Real>* row_conv_weights() const { return row_conv_; }

  /// h = encoder(x), [U x output_dim()].
  Var<Real> encode(Graph<Real>& g, const FeatureMatrix& x) const {
    if (x.frames == 0) throw ShapeError("encode: degenerate input with no frames");
    if (x.dims != cfg_.input_dim)
      throw ShapeError("encode: features have " + std::to_string(x.dims) + " dims, encoder expects " +
                       std::to_string(cfg_.input_dim));
    const auto& ds = cfg_.downsample;
    FeatureMatrix stacked;
    if (ds.stack != 1 || ds.subsample != 1) stacked = stack_frames(x, ds.stack, ds.subsample);
    const FeatureMatrix& in = stacked.frames ? stacked : x;
    Tensor<Real> t({in.frames, in.dims, 1});
    for (std::size_t i = 0; i < in.values.size(); ++i) t.data[i] = Real(in.values[i]);
    Var<Real> map = g.constant(std::move(t));
    for (const auto& layer : conv_) {
      auto y = ops::add_bias(ops::conv2d(map, g.param(*layer.kernel), layer.stride, kConvFreqStride),
                             g.param(*layer.bias));
      const auto s = y.shape();
      map = ops::reshape(ops::relu(layer.norm(g, ops::reshape(y, {s[0], s[1] * s[2]}))), s);
    }
    for (const auto& mu : mu_) map = mu_forward(g, map, mu);
    const auto s = map.shape();
    Var<Real> h = ops::reshape(map, {s[0], s[1] * s[2]});
    for (const auto& layer : lstm_) {
      Var<Real> r = layer.fwd(g, h, false);
      if (cfg_.bidirectional) r = ops::concat_cols(r, layer.bwd(g, h, true));
      h = layer.norm(g, ops::relu(layer.proj(g, r)));
      if (layer.pool_width > 1) h = ops::max_pool_time(h, layer.pool_width);
    }
    if (row_conv_) h = ops::row_conv(h, g.param(*row_conv_));
    if (h.shape()[0] < 1) throw ShapeError("encode: degenerate output length");
    return h;
  }

 private:
  struct ConvLayer {
    Param<Real>* kernel;
    Param<Real>* bias;
    LayerNormParams<Real> norm;
    std::size_t stride;
  };
  struct RecurrentLayer {
    LstmParams<Real> fwd;
    LstmParams<Real> bwd;
    Linear<Real> proj;
    LayerNormParams<Real> norm;
    std::size_t pool_width = 1;
  };

  EncoderConfig cfg_;
  std::vector<ConvLayer> conv_;
  std::vector<MUParams<Real>> mu_;
  std::vector<RecurrentLayer> lstm_;
  Param<Real>* row_conv_ = nullptr;
};

}  // namespace erna
