// erna/numeric/graph.hpp

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
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "erna/error.hpp"
#include "erna/numeric/tensor.hpp"

// Reverse-mode differentiation over a per-computation tape.
//
// A Graph records every operation in execution order. Leaves are either
// constants or Params; backward() walks the record once in reverse and
// accumulates into Param::grad. The tape is discarded after each step and
// rebuilt for the next, so recurrent unrolling needs no special handling.
// A Graph is not thread-safe; independent graphs may run concurrently as long
// as they only read shared Params.

namespace erna {

/// A trainable tensor with its gradient accumulator.
template <class Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  /// Frozen params take part in the forward pass but never receive gradient.
  bool frozen = false;

  Param() = default;
  Param(std::string n, Tensor<Real> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), Real(0)); }
};

template <class Real>
class Graph;

/// Handle to one recorded node.
template <class Real>
class Var {
 public:
  Var() = default;
  Var(Graph<Real>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<Real>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor<Real>& tensor() const { return graph_->value(id_); }
  const Shape& shape() const { return tensor().shape; }
  const std::vector<Real>& value() const { return tensor().data; }
  std::size_t size() const { return tensor().size(); }
  Real item() const {
    if (size() != 1) throw UsageError("item() on tensor " + to_string(shape()));
    return value()[0];
  }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<Real>* graph_ = nullptr;
  std::size_t id_ = 0;
};

template <class Real>
class Graph {
 public:
  /// Propagates the gradient of node `self` into its inputs.
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Real> constant(Tensor<Real> value) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, nullptr});
    return {this, nodes_.size() - 1};
  }

  Var<Real> param(Param<Real>& p) {
    nodes_.push_back(Node{p.value, {}, !p.frozen, nullptr, &p});
    return {this, nodes_.size() - 1};
  }

  /// Records an op result. The node requires grad iff any input does; the
  /// backward function is dropped otherwise.
  Var<Real> record(Tensor<Real> value, std::initializer_list<Var<Real>> inputs,
                   BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    nodes_.push_back(Node{std::move(value), {}, needs,
                          needs ? std::move(backward) : nullptr, nullptr});
    return {this, nodes_.size() - 1};
  }

  const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, allocated on first use.
  std::vector<Real>& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), Real(0));
    return n.grad;
  }

  /// Gradient buffer if the node participates in differentiation, else null.
  Real* grad_if(std::size_t id) {
    return requires_grad(id) ? grad(id).data() : nullptr;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Backpropagates d(loss)/d(.) and adds it into every reachable, unfrozen
  /// Param::grad. Node gradients are reset first, so calling this twice on
  /// the same graph doubles the accumulated param gradients.
  void backward(const Var<Real>& loss) {
    if (loss.size() != 1)
      throw UsageError("backward() needs a scalar loss, got " +
                       to_string(loss.shape()));
    if (&loss.graph() != this)
      throw UsageError("backward() on a Var from another graph");
    for (auto& n : nodes_) n.grad.clear();
    if (!requires_grad(loss.id())) return;
    grad(loss.id())[0] = Real(1);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.param != nullptr) {
        auto& g = n.param->grad.data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      } else if (n.backward) {
        n.backward(*this, id);
      }
    }
  }

 private:
  struct Node {
    Tensor<Real> value;
    std::vector<Real> grad;
    bool requires_grad;
    BackwardFn backward;
    Param<Real>* param;
  };
  std::vector<Node> nodes_;
};

}  // namespace erna
