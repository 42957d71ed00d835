// erna/numeric/lstm.hpp

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
#include <cstddef>
#include <vector>

#include "erna/numeric/graph.hpp"
#include "erna/numeric/ops.hpp"

namespace erna {

/// Borrowed view of one LSTM layer's weights. Gate blocks are ordered
/// input, forget, cell, output along the 4H axis.
template <class Real>
struct LstmView {
  const Real* wx;  // [in x 4H]
  const Real* wh;  // [H x 4H]
  const Real* b;   // [4H]
  std::size_t in;
  std::size_t hidden;
};

/// One LSTM step. Writes activated gates (i, f, g, o) to `gates`, the new
/// cell to `c` and the new output to `h`. Shared by the fused sequence op
/// and by step-wise inference so both produce identical numbers.
template <class Real>
void lstm_cell_forward(const LstmView<Real>& w, const Real* x, const Real* h_prev,
                       const Real* c_prev, Real* gates, Real* c, Real* h) {
  const std::size_t H = w.hidden, G = 4 * H;
  for (std::size_t j = 0; j < G; ++j) gates[j] = 0;
  for (std::size_t k = 0; k < w.in; ++k) {
    const Real xv = x[k];
    const Real* row = w.wx + k * G;
    for (std::size_t j = 0; j < G; ++j) gates[j] += xv * row[j];
  }
  for (std::size_t k = 0; k < H; ++k) {
    const Real hv = h_prev[k];
    const Real* row = w.wh + k * G;
    for (std::size_t j = 0; j < G; ++j) gates[j] += hv * row[j];
  }
  for (std::size_t j = 0; j < G; ++j) gates[j] += w.b[j];
  for (std::size_t j = 0; j < H; ++j) {
    const Real i = ops::detail::sigmoid(gates[j]);
    const Real f = ops::detail::sigmoid(gates[H + j]);
    const Real g = std::tanh(gates[2 * H + j]);
    const Real o = ops::detail::sigmoid(gates[3 * H + j]);
    gates[j] = i;
    gates[H + j] = f;
    gates[2 * H + j] = g;
    gates[3 * H + j] = o;
    c[j] = f * c_prev[j] + i * g;
    h[j] = o * std::tanh(c[j]);
  }
}

namespace ops {

/// Runs an LSTM layer over all rows of x [T x in] from zero initial state and
/// returns the outputs [T x H]. With `reverse`, time runs from T-1 down to 0
/// (output row t still corresponds to input row t). Backward is full BPTT.
template <class Real>
Var<Real> lstm_sequence(const Var<Real>& x, const Var<Real>& wx, const Var<Real>& wh,
                        const Var<Real>& b, bool reverse = false) {
  const auto& X = x.tensor();
  if (X.rank() != 2) throw ShapeError("lstm_sequence expects [T x in], got " + to_string(X.shape));
  const std::size_t T = X.dim(0), in = X.dim(1);
  if (wx.tensor().rank() != 2 || wx.shape()[0] != in || wx.shape()[1] % 4 != 0)
    throw ShapeError("lstm_sequence: input weights " + to_string(wx.shape()) +
                     " do not fit input " + to_string(X.shape));
  const std::size_t H = wx.shape()[1] / 4, G = 4 * H;
  if (wh.shape() != Shape{H, G} || b.size() != G)
    throw ShapeError("lstm_sequence: recurrent weights " + to_string(wh.shape()) +
                     " / bias " + to_string(b.shape()) + " inconsistent with H=" +
                     std::to_string(H));

  Tensor<Real> out({T, H});
  std::vector<Real> gates(T * G), cells(T * H);
  const std::vector<Real> zeros(H, Real(0));
  const LstmView<Real> w{wx.value().data(), wh.value().data(), b.value().data(), in, H};
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    const std::size_t prev = reverse ? t + 1 : t - 1;
    const Real* hp = s == 0 ? zeros.data() : &out.data[prev * H];
    const Real* cp = s == 0 ? zeros.data() : &cells[prev * H];
    lstm_cell_forward(w, &X.data[t * in], hp, cp, &gates[t * G], &cells[t * H],
                      &out.data[t * H]);
  }

  const std::size_t ix = x.id(), iwx = wx.id(), iwh = wh.id(), ib = b.id();
  return x.graph().record(
      std::move(out), {x, wx, wh, b},
      [=, gates = std::move(gates), cells = std::move(cells)](Graph<Real>& g,
                                                              std::size_t self) {
        const auto& Gout = g.grad(self);
        const auto& Hv = g.value(self).data;
        const auto& Xv = g.value(ix).data;
        const auto& WX = g.value(iwx).data;
        const auto& WH = g.value(iwh).data;
        Real* gx = g.grad_if(ix);
        Real* gwx = g.grad_if(iwx);
        Real* gwh = g.grad_if(iwh);
        Real* gb = g.grad_if(ib);
        std::vector<Real> dh_next(H, Real(0)), dc_next(H, Real(0)), dz(G);
        for (std::size_t s = T; s-- > 0;) {
          const std::size_t t = reverse ? T - 1 - s : s;
          const std::size_t prev = reverse ? t + 1 : t - 1;
          const bool first = s == 0;
          const Real* gt = &gates[t * G];
          for (std::size_t j = 0; j < H; ++j) {
            const Real i = gt[j], f = gt[H + j], gg = gt[2 * H + j], o = gt[3 * H + j];
            const Real tc = std::tanh(cells[t * H + j]);
            const Real dh = Gout[t * H + j] + dh_next[j];
            const Real dc = dh * o * (Real(1) - tc * tc) + dc_next[j];
            const Real c_prev = first ? Real(0) : cells[prev * H + j];
            dz[j] = dc * gg * i * (Real(1) - i);
            dz[H + j] = dc * c_prev * f * (Real(1) - f);
            dz[2 * H + j] = dc * i * (Real(1) - gg * gg);
            dz[3 * H + j] = dh * tc * o * (Real(1) - o);
            dc_next[j] = dc * f;
          }
          if (gb)
            for (std::size_t j = 0; j < G; ++j) gb[j] += dz[j];
          const Real* xt = &Xv[t * in];
          for (std::size_t k = 0; k < in; ++k) {
            const Real* wrow = &WX[k * G];
            Real acc = 0;
            for (std::size_t j = 0; j < G; ++j) {
              acc += dz[j] * wrow[j];
              if (gwx) gwx[k * G + j] += xt[k] * dz[j];
            }
            if (gx) gx[t * in + k] += acc;
          }
          for (std::size_t k = 0; k < H; ++k) {
            const Real hp = first ? Real(0) : Hv[prev * H + k];
            const Real* wrow = &WH[k * G];
            Real acc = 0;
            for (std::size_t j = 0; j < G; ++j) {
              acc += dz[j] * wrow[j];
              if (gwh) gwh[k * G + j] += hp * dz[j];
            }
            dh_next[k] = acc;
          }
        }
      });
}

}  // namespace ops
}  // namespace erna
