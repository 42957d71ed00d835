// erna/frontend/downsample.hpp

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

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "erna/error.hpp"

// Temporal down-sampling layouts. The text form is a '+'-separated list of
// terms, each optional but in this order:
//
//   stack{k}-subsample{s}          frame stacking of k frames, keep every s-th
//   conv-stride{s1,s2,...}         one strided conv layer per entry
//   pooling{l1,l2,...}-width{w1,w2,...}
//                                  max-pool of width wi after LSTM layer li
//
// e.g. "conv-stride{2} + pooling{2,4}-width{2,2}" (overall rate 1/8). The
// phrase "frame stacking and sub-sampling" is accepted as stack{3}-subsample{3}.

namespace erna {

/// Parse failure with the character position where it happened.
class SpecParseError : public ConfigError {
 public:
  SpecParseError(const std::string& what, std::size_t position)
      : ConfigError(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

struct PoolingLayer {
  std::size_t after_layer;  // 1-based LSTM layer index
  std::size_t width;
  bool operator==(const PoolingLayer&) const = default;
};

struct DownsampleSpec {
  std::size_t stack = 1;
  std::size_t subsample = 1;
  std::vector<std::size_t> conv_strides;
  std::vector<PoolingLayer> pooling;

  bool operator==(const DownsampleSpec&) const = default;

  /// Overall rate is 1 / rate_denominator().
  std::size_t rate_denominator() const {
    std::size_t r = subsample;
    for (auto s : conv_strides) r *= s;
    for (const auto& p : pooling) r *= p.width;
    return r;
  }

  /// Encoder output length for T input frames: each stage applies ceil(./s).
  std::size_t output_length(std::size_t frames) const {
    auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    std::size_t n = ceil_div(frames, subsample);
    for (auto s : conv_strides) n = ceil_div(n, s);
    for (const auto& p : pooling) n = ceil_div(n, p.width);
    return n;
  }

  std::size_t max_pooling_layer() const {
    return pooling.empty() ? 0 : pooling.back().after_layer;
  }

  std::string to_string() const {
    auto list = [](const std::vector<std::size_t>& v) {
      std::string s = "{";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
      return s + "}";
    };
    std::vector<std::string> terms;
    if (stack != 1 || subsample != 1)
      terms.push_back("stack{" + std::to_string(stack) + "}-subsample{" +
                      std::to_string(subsample) + "}");
    if (!conv_strides.empty()) terms.push_back("conv-stride" + list(conv_strides));
    if (!pooling.empty()) {
      std::vector<std::size_t> layers, widths;
      for (const auto& p : pooling) {
        layers.push_back(p.after_layer);
        widths.push_back(p.width);
      }
      terms.push_back("pooling" + list(layers) + "-width" + list(widths));
    }
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) out += (i ? "+" : "") + terms[i];
    return out;
  }
};

namespace detail {

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : s_(text) {}

  DownsampleSpec parse() {
    DownsampleSpec spec;
    skip_ws();
    if (at_end()) return spec;
    int stage = 0;  // 1 stack, 2 conv, 3 pooling
    while (true) {
      skip_ws();
      const std::size_t start = pos_;
      if (accept("frame stacking and sub-sampling")) {
        require_order(stage, 1, start);
        spec.stack = 3;
        spec.subsample = 3;
      } else if (accept("stack")) {
        require_order(stage, 1, start);
        spec.stack = single(list());
        expect("-subsample");
        spec.subsample = single(list());
      } else if (accept("conv-stride")) {
        require_order(stage, 2, start);
        spec.conv_strides = list();
      } else if (accept("pooling")) {
        require_order(stage, 3, start);
        const std::size_t layers_at = pos_;
        auto layers = list();
        expect("-width");
        auto widths = list();
        if (layers.size() != widths.size())
          throw SpecParseError("pooling{} has " + std::to_string(layers.size()) +
                                   " entries but width{} has " + std::to_string(widths.size()),
                               layers_at);
        for (std::size_t i = 0; i < layers.size(); ++i) {
          if (i > 0 && layers[i] <= layers[i - 1])
            throw SpecParseError("pooling layer indices must be strictly increasing", layers_at);
          spec.pooling.push_back({layers[i], widths[i]});
        }
      } else {
        throw SpecParseError("unknown token", pos_);
      }
      skip_ws();
      if (at_end()) break;
      expect("+");
    }
    return spec;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(std::string_view word) {
    if (s_.substr(pos_, word.size()) != word) return false;
    pos_ += word.size();
    return true;
  }
  void expect(std::string_view word) {
    skip_ws();
    if (!accept(word)) throw SpecParseError("expected '" + std::string(word) + "'", pos_);
  }
  void require_order(int& stage, int next, std::size_t at) {
    if (next <= stage) throw SpecParseError("term out of order or repeated", at);
    stage = next;
  }
  std::vector<std::size_t> list() {
    expect("{");
    std::vector<std::size_t> out;
    while (true) {
      skip_ws();
      const std::size_t start = pos_;
      std::size_t v = 0;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
        v = v * 10 + std::size_t(s_[pos_++] - '0');
      if (pos_ == start) throw SpecParseError("expected a number", start);
      if (v == 0) throw SpecParseError("values must be >= 1", start);
      out.push_back(v);
      skip_ws();
      if (accept("}")) break;
      expect(",");
    }
    return out;
  }
  std::size_t single(const std::vector<std::size_t>& v) {
    if (v.size() != 1) throw SpecParseError("expected exactly one value", pos_);
    return v[0];
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the down-sampling grammar described above. An empty string means
/// no down-sampling.
inline DownsampleSpec parse_downsample_spec(std::string_view text) {
  return detail::SpecParser(text).parse();
}

}  // namespace erna
