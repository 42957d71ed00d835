// erna/numeric/ops.hpp

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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "erna/error.hpp"
#include "erna/numeric/graph.hpp"
#include "erna/numeric/tensor.hpp"

namespace erna::ops {

namespace detail {

template <class Real>
void require_same_shape(const Var<Real>& a, const Var<Real>& b,
                        const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <class Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

inline std::size_t ceil_div(std::size_t a, std::size_t b) {
  return (a + b - 1) / b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// C[m x n] = A[m x k] * B[k x n].
template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  const auto& A = a.tensor();
  const auto& B = b.tensor();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
    throw ShapeError("matmul: cannot multiply " + to_string(A.shape) + " by " +
                     to_string(B.shape));
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor<Real> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    Real* c = &out.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = A.data[i * k + p];
      const Real* brow = &B.data[p * n];
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(
      std::move(out), {a, b}, [ia, ib, m, k, n](Graph<Real>& g, std::size_t self) {
        const auto& G = g.grad(self);
        const auto& Av = g.value(ia).data;
        const auto& Bv = g.value(ib).data;
        if (Real* ga = g.grad_if(ia)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              Real s = 0;
              for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * Bv[p * n + j];
              ga[i * k + p] += s;
            }
        }
        if (Real* gb = g.grad_if(ib)) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const Real av = Av[i * k + p];
              for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
            }
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<Real> out = a.tensor();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [ia, ib](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            for (std::size_t in : {ia, ib})
                              if (Real* gi = g.grad_if(in))
                                for (std::size_t i = 0; i < G.size(); ++i) gi[i] += G[i];
                          });
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<Real> out = a.tensor();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [ia, ib](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            if (Real* ga = g.grad_if(ia))
                              for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
                            if (Real* gb = g.grad_if(ib))
                              for (std::size_t i = 0; i < G.size(); ++i) gb[i] -= G[i];
                          });
}

/// Hadamard product.
template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<Real> out = a.tensor();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [ia, ib](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            const auto& Av = g.value(ia).data;
                            const auto& Bv = g.value(ib).data;
                            if (Real* ga = g.grad_if(ia))
                              for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * Bv[i];
                            if (Real* gb = g.grad_if(ib))
                              for (std::size_t i = 0; i < G.size(); ++i) gb[i] += G[i] * Av[i];
                          });
}

template <class Real>
Var<Real> scale(const Var<Real>& a, Real s) {
  Tensor<Real> out = a.tensor();
  for (auto& v : out.data) v *= s;
  const std::size_t ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia, s](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            Real* ga = g.grad(ia).data();
                            for (std::size_t i = 0; i < G.size(); ++i) ga[i] += s * G[i];
                          });
}

/// x[.. x d] + b[d], broadcast over every leading index.
template <class Real>
Var<Real> add_bias(const Var<Real>& x, const Var<Real>& bias) {
  const std::size_t d = x.tensor().cols();
  if (bias.size() != d)
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) +
                     " does not match last axis of " + to_string(x.shape()));
  Tensor<Real> out = x.tensor();
  const auto& b = bias.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % d];
  const std::size_t ix = x.id(), ib = bias.id();
  return x.graph().record(std::move(out), {x, bias},
                          [ix, ib, d](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            if (Real* gx = g.grad_if(ix))
                              for (std::size_t i = 0; i < G.size(); ++i) gx[i] += G[i];
                            if (Real* gb = g.grad_if(ib))
                              for (std::size_t i = 0; i < G.size(); ++i) gb[i % d] += G[i];
                          });
}

enum class Activation { kSigmoid, kTanh, kRelu };

template <class Real>
Var<Real> activation(const Var<Real>& x, Activation kind) {
  Tensor<Real> out = x.tensor();
  for (auto& v : out.data) {
    switch (kind) {
      case Activation::kSigmoid: v = detail::sigmoid(v); break;
      case Activation::kTanh: v = std::tanh(v); break;
      case Activation::kRelu: v = v > Real(0) ? v : Real(0); break;
    }
  }
  const std::size_t ix = x.id();
  return x.graph().record(
      std::move(out), {x}, [ix, kind](Graph<Real>& g, std::size_t self) {
        const auto& G = g.grad(self);
        const auto& Y = g.value(self).data;
        Real* gx = g.grad(ix).data();
        for (std::size_t i = 0; i < G.size(); ++i) {
          Real d = 0;
          switch (kind) {
            case Activation::kSigmoid: d = Y[i] * (Real(1) - Y[i]); break;
            case Activation::kTanh: d = Real(1) - Y[i] * Y[i]; break;
            case Activation::kRelu: d = Y[i] > Real(0) ? Real(1) : Real(0); break;
          }
          gx[i] += G[i] * d;
        }
      });
}

template <class Real>
Var<Real> sigmoid(const Var<Real>& x) { return activation(x, Activation::kSigmoid); }
template <class Real>
Var<Real> tanh(const Var<Real>& x) { return activation(x, Activation::kTanh); }
template <class Real>
Var<Real> relu(const Var<Real>& x) { return activation(x, Activation::kRelu); }

// ---------------------------------------------------------------------------
// Normalizers over the last axis

/// Row-wise softmax over the last axis, max-shifted.
template <class Real>
Var<Real> softmax(const Var<Real>& x) {
  const std::size_t K = x.tensor().cols();
  if (K == 0) throw ShapeError("softmax over an empty axis");
  Tensor<Real> out = x.tensor();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    Real* row = &out.data[r * K];
    const Real mx = *std::max_element(row, row + K);
    Real z = 0;
    for (std::size_t k = 0; k < K; ++k) z += (row[k] = std::exp(row[k] - mx));
    for (std::size_t k = 0; k < K; ++k) row[k] /= z;
  }
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x},
                          [ix, K](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            const auto& Y = g.value(self).data;
                            Real* gx = g.grad(ix).data();
                            for (std::size_t r = 0; r < G.size() / K; ++r) {
                              Real dot = 0;
                              for (std::size_t k = 0; k < K; ++k) dot += G[r * K + k] * Y[r * K + k];
                              for (std::size_t k = 0; k < K; ++k)
                                gx[r * K + k] += Y[r * K + k] * (G[r * K + k] - dot);
                            }
                          });
}

template <class Real>
Var<Real> log_softmax(const Var<Real>& x) {
  const std::size_t K = x.tensor().cols();
  if (K == 0) throw ShapeError("log_softmax over an empty axis");
  Tensor<Real> out = x.tensor();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    Real* row = &out.data[r * K];
    const Real mx = *std::max_element(row, row + K);
    Real z = 0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    const Real lz = mx + std::log(z);
    for (std::size_t k = 0; k < K; ++k) row[k] -= lz;
  }
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x},
                          [ix, K](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            const auto& Y = g.value(self).data;
                            Real* gx = g.grad(ix).data();
                            for (std::size_t r = 0; r < G.size() / K; ++r) {
                              Real s = 0;
                              for (std::size_t k = 0; k < K; ++k) s += G[r * K + k];
                              for (std::size_t k = 0; k < K; ++k)
                                gx[r * K + k] += G[r * K + k] - std::exp(Y[r * K + k]) * s;
                            }
                          });
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Normalizes each row of the last axis to zero mean and unit variance
/// (variance + 1e-5), then applies gain and bias of length d.
template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain,
                     const Var<Real>& bias) {
  const std::size_t d = x.tensor().cols();
  if (d == 0) throw ShapeError("layer_norm over an empty axis");
  if (gain.size() != d || bias.size() != d)
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) +
                     " entries");
  const std::size_t rows = x.tensor().rows();
  Tensor<Real> out(x.shape());
  // xhat per element and 1/std per row, kept for backward
  std::vector<Real> xhat(out.size()), inv_std(rows);
  const auto& X = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    Real mean = 0;
    for (std::size_t k = 0; k < d; ++k) mean += X[r * d + k];
    mean /= Real(d);
    Real var = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const Real c = X[r * d + k] - mean;
      var += c * c;
    }
    var /= Real(d);
    inv_std[r] = Real(1) / std::sqrt(var + Real(kLayerNormEpsilon));
    for (std::size_t k = 0; k < d; ++k) {
      xhat[r * d + k] = (X[r * d + k] - mean) * inv_std[r];
      out.data[r * d + k] = xhat[r * d + k] * gv[k] + bv[k];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph().record(
      std::move(out), {x, gain, bias},
      [ix, ig, ib, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph<Real>& g, std::size_t self) {
        const auto& G = g.grad(self);
        const auto& gv = g.value(ig).data;
        if (Real* gg = g.grad_if(ig))
          for (std::size_t i = 0; i < G.size(); ++i) gg[i % d] += G[i] * xhat[i];
        if (Real* gb = g.grad_if(ib))
          for (std::size_t i = 0; i < G.size(); ++i) gb[i % d] += G[i];
        if (Real* gx = g.grad_if(ix)) {
          for (std::size_t r = 0; r < rows; ++r) {
            Real sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t k = 0; k < d; ++k) {
              const Real dy = G[r * d + k] * gv[k];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat[r * d + k];
            }
            for (std::size_t k = 0; k < d; ++k) {
              const Real dy = G[r * d + k] * gv[k];
              gx[r * d + k] += inv_std[r] / Real(d) *
                               (Real(d) * dy - sum_dy - xhat[r * d + k] * sum_dy_xhat);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

/// 2-D convolution over a [T x F x c_in] map with a [k_t x k_f x c_in x c_out]
/// kernel. Windows are centred (pad (k-1)/2 before), out-of-range cells read
/// as zero, and the output is [ceil(T/s_t) x ceil(F/s_f) x c_out].
template <class Real>
Var<Real> conv2d(const Var<Real>& input, const Var<Real>& kernel,
                 std::size_t stride_t, std::size_t stride_f) {
  const auto& I = input.tensor();
  const auto& K = kernel.tensor();
  if (I.rank() != 3 || K.rank() != 4)
    throw ShapeError("conv2d: expected [T x F x c] input and 4-d kernel, got " +
                     to_string(I.shape) + " and " + to_string(K.shape));
  if (I.size() == 0) throw ShapeError("conv2d: zero-sized input " + to_string(I.shape));
  if (stride_t == 0 || stride_f == 0) throw ConfigError("conv2d: stride must be >= 1");
  const std::size_t T = I.dim(0), F = I.dim(1), cin = I.dim(2);
  const std::size_t kt = K.dim(0), kf = K.dim(1), cout = K.dim(3);
  if (K.dim(2) != cin)
    throw ShapeError("conv2d: kernel " + to_string(K.shape) +
                     " does not match input channels of " + to_string(I.shape));
  const std::size_t pt = (kt - 1) / 2, pf = (kf - 1) / 2;
  if (kt > T + 2 * pt || kf > F + 2 * pf)
    throw ShapeError("conv2d: kernel " + to_string(K.shape) +
                     " larger than padded input " + to_string(I.shape));
  const std::size_t To = detail::ceil_div(T, stride_t);
  const std::size_t Fo = detail::ceil_div(F, stride_f);
  Tensor<Real> out({To, Fo, cout});
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t to = 0; to < To; ++to)
      for (std::size_t fo = 0; fo < Fo; ++fo)
        for (std::size_t i = 0; i < kt; ++i) {
          const long t = long(to * stride_t + i) - long(pt);
          if (t < 0 || t >= long(T)) continue;
          for (std::size_t j = 0; j < kf; ++j) {
            const long f = long(fo * stride_f + j) - long(pf);
            if (f < 0 || f >= long(F)) continue;
            fn((to * Fo + fo) * cout, (std::size_t(t) * F + std::size_t(f)) * cin,
               (i * kf + j) * cin * cout);
          }
        }
  };
  for_each_tap([&](std::size_t o, std::size_t x, std::size_t k) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const Real xv = I.data[x + ci];
      const Real* krow = &K.data[k + ci * cout];
      for (std::size_t co = 0; co < cout; ++co) out.data[o + co] += xv * krow[co];
    }
  });
  const std::size_t ii = input.id(), ik = kernel.id();
  return input.graph().record(
      std::move(out), {input, kernel},
      [ii, ik, cin, cout, for_each_tap](Graph<Real>& g, std::size_t self) {
        const auto& G = g.grad(self);
        const auto& Iv = g.value(ii).data;
        const auto& Kv = g.value(ik).data;
        Real* gi = g.grad_if(ii);
        Real* gk = g.grad_if(ik);
        for_each_tap([&](std::size_t o, std::size_t x, std::size_t k) {
          for (std::size_t ci = 0; ci < cin; ++ci) {
            Real acc = 0;
            for (std::size_t co = 0; co < cout; ++co) {
              const Real go = G[o + co];
              acc += go * Kv[k + ci * cout + co];
              if (gk) gk[k + ci * cout + co] += go * Iv[x + ci];
            }
            if (gi) gi[x + ci] += acc;
          }
        });
      });
}

/// Max over non-overlapping windows of `width` rows. The tail window is
/// padded with zero rows, so an all-negative tail yields 0.
template <class Real>
Var<Real> max_pool_time(const Var<Real>& x, std::size_t width) {
  if (width == 0) throw ConfigError("max_pool_time: width must be >= 1");
  const auto& X = x.tensor();
  if (X.rank() != 2) throw ShapeError("max_pool_time expects [T x d], got " + to_string(X.shape));
  const std::size_t T = X.dim(0), d = X.dim(1);
  const std::size_t To = detail::ceil_div(T, width);
  Tensor<Real> out({To, d});
  // source row per output cell; T marks a padding cell
  std::vector<std::size_t> arg(To * d, T);
  for (std::size_t to = 0; to < To; ++to)
    for (std::size_t k = 0; k < d; ++k) {
      bool have = false;
      Real best = 0;
      std::size_t src = T;
      for (std::size_t w = 0; w < width; ++w) {
        const std::size_t t = to * width + w;
        const Real v = t < T ? X.data[t * d + k] : Real(0);
        if (!have || v > best) {
          best = v;
          src = t < T ? t : T;
          have = true;
        }
      }
      out.data[to * d + k] = best;
      arg[to * d + k] = src;
    }
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x},
                          [ix, d, T, arg = std::move(arg)](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            Real* gx = g.grad(ix).data();
                            for (std::size_t i = 0; i < G.size(); ++i)
                              if (arg[i] < T) gx[arg[i] * d + i % d] += G[i];
                          });
}

/// Lookahead convolution: out[t] = sum_{tau=0..C} w[tau] * x[t + tau],
/// per dimension, with frames past the end read as zero. w is [(C+1) x d].
template <class Real>
Var<Real> row_conv(const Var<Real>& x, const Var<Real>& weights) {
  const auto& X = x.tensor();
  const auto& W = weights.tensor();
  if (X.rank() != 2 || W.rank() != 2 || W.dim(1) != X.dim(1) || W.dim(0) == 0)
    throw ShapeError("row_conv: input " + to_string(X.shape) + " and weights " +
                     to_string(W.shape) + " incompatible");
  const std::size_t T = X.dim(0), d = X.dim(1), taps = W.dim(0);
  Tensor<Real> out({T, d});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t tau = 0; tau < taps && t + tau < T; ++tau)
      for (std::size_t k = 0; k < d; ++k)
        out.data[t * d + k] += W.data[tau * d + k] * X.data[(t + tau) * d + k];
  const std::size_t ix = x.id(), iw = weights.id();
  return x.graph().record(
      std::move(out), {x, weights}, [ix, iw, T, d, taps](Graph<Real>& g, std::size_t self) {
        const auto& G = g.grad(self);
        const auto& Xv = g.value(ix).data;
        const auto& Wv = g.value(iw).data;
        Real* gx = g.grad_if(ix);
        Real* gw = g.grad_if(iw);
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t tau = 0; tau < taps && t + tau < T; ++tau)
            for (std::size_t k = 0; k < d; ++k) {
              const Real go = G[t * d + k];
              if (gx) gx[(t + tau) * d + k] += go * Wv[tau * d + k];
              if (gw) gw[tau * d + k] += go * Xv[(t + tau) * d + k];
            }
      });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <class Real>
Var<Real> reshape(const Var<Real>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  Tensor<Real> out(std::move(shape), x.value());
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph<Real>& g, std::size_t self) {
    const auto& G = g.grad(self);
    Real* gx = g.grad(ix).data();
    for (std::size_t i = 0; i < G.size(); ++i) gx[i] += G[i];
  });
}

/// [T x p] ++ [T x q] -> [T x (p+q)].
template <class Real>
Var<Real> concat_cols(const Var<Real>& a, const Var<Real>& b) {
  const auto& A = a.tensor();
  const auto& B = b.tensor();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(0) != B.dim(0))
    throw ShapeError("concat_cols: " + to_string(A.shape) + " and " + to_string(B.shape));
  const std::size_t T = A.dim(0), p = A.dim(1), q = B.dim(1);
  Tensor<Real> out({T, p + q});
  for (std::size_t t = 0; t < T; ++t) {
    std::copy_n(&A.data[t * p], p, &out.data[t * (p + q)]);
    std::copy_n(&B.data[t * q], q, &out.data[t * (p + q) + p]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [ia, ib, T, p, q](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            Real* ga = g.grad_if(ia);
                            Real* gb = g.grad_if(ib);
                            for (std::size_t t = 0; t < T; ++t) {
                              if (ga) for (std::size_t k = 0; k < p; ++k) ga[t * p + k] += G[t * (p + q) + k];
                              if (gb) for (std::size_t k = 0; k < q; ++k) gb[t * q + k] += G[t * (p + q) + p + k];
                            }
                          });
}

/// All row pairs: out[u * M + m] = [a[u]; b[m]], giving [(U*M) x (p+q)].
template <class Real>
Var<Real> pair_rows(const Var<Real>& a, const Var<Real>& b) {
  const auto& A = a.tensor();
  const auto& B = b.tensor();
  if (A.rank() != 2 || B.rank() != 2)
    throw ShapeError("pair_rows expects matrices, got " + to_string(A.shape) +
                     " and " + to_string(B.shape));
  const std::size_t U = A.dim(0), p = A.dim(1), M = B.dim(0), q = B.dim(1);
  const std::size_t w = p + q;
  Tensor<Real> out({U * M, w});
  for (std::size_t u = 0; u < U; ++u)
    for (std::size_t m = 0; m < M; ++m) {
      std::copy_n(&A.data[u * p], p, &out.data[(u * M + m) * w]);
      std::copy_n(&B.data[m * q], q, &out.data[(u * M + m) * w + p]);
    }
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [ia, ib, U, M, p, q, w](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            Real* ga = g.grad_if(ia);
                            Real* gb = g.grad_if(ib);
                            for (std::size_t u = 0; u < U; ++u)
                              for (std::size_t m = 0; m < M; ++m) {
                                const Real* row = &G[(u * M + m) * w];
                                if (ga) for (std::size_t k = 0; k < p; ++k) ga[u * p + k] += row[k];
                                if (gb) for (std::size_t k = 0; k < q; ++k) gb[m * q + k] += row[p + k];
                              }
                          });
}

/// Selects rows of a [R x d] matrix (repeats allowed), e.g. embedding lookup.
template <class Real>
Var<Real> gather_rows(const Var<Real>& x, std::vector<std::size_t> index) {
  const auto& X = x.tensor();
  if (X.rank() != 2) throw ShapeError("gather_rows expects a matrix, got " + to_string(X.shape));
  const std::size_t R = X.dim(0), d = X.dim(1);
  Tensor<Real> out({index.size(), d});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= R)
      throw ShapeError("gather_rows: row " + std::to_string(index[i]) + " out of " +
                       std::to_string(R));
    std::copy_n(&X.data[index[i] * d], d, &out.data[i * d]);
  }
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x},
                          [ix, d, index = std::move(index)](Graph<Real>& g, std::size_t self) {
                            const auto& G = g.grad(self);
                            Real* gx = g.grad(ix).data();
                            for (std::size_t i = 0; i < index.size(); ++i)
                              for (std::size_t k = 0; k < d; ++k) gx[index[i] * d + k] += G[i * d + k];
                          });
}

// ---------------------------------------------------------------------------
// Reductions

template <class Real>
Var<Real> sum(const Var<Real>& x) {
  Real s = 0;
  for (Real v : x.value()) s += v;
  const std::size_t ix = x.id();
  return x.graph().record(Tensor<Real>::scalar(s), {x},
                          [ix](Graph<Real>& g, std::size_t self) {
                            const Real G = g.grad(self)[0];
                            auto& gx = g.grad(ix);
                            for (auto& v : gx) v += G;
                          });
}

/// Sums the last axis: [.. x d] -> [..].
template <class Real>
Var<Real> sum_last(const Var<Real>& x) {
  const std::size_t d = x.tensor().cols();
  Shape shape = x.shape();
  if (!shape.empty()) shape.pop_back();
  Tensor<Real> out(shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i / d] += x.value()[i];
  const std::size_t ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, d](Graph<Real>& g, std::size_t self) {
    const auto& G = g.grad(self);
    auto& gx = g.grad(ix);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += G[i / d];
  });
}

/// Per-row entropy of softmax(logits) in nats: [.. x K] -> [..].
template <class Real>
Var<Real> softmax_entropy(const Var<Real>& logits) {
  auto p = softmax(logits);
  auto logp = log_softmax(logits);
  return scale(sum_last(mul(p, logp)), Real(-1));
}

}  // namespace erna::ops
