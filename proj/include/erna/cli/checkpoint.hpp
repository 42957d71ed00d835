// erna/cli/checkpoint.hpp

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
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "erna/cli/config.hpp"
#include "erna/cli/model.hpp"
#include "erna/error.hpp"
#include "erna/frontend/features.hpp"
#include "erna/frontend/vocabulary.hpp"

// Binary checkpoint, all integers little endian:
//
//   "ERNACKPT" | u32 version | u32 part flags | u64 step
//   | str config text
//   | u32 has_normalizer [ stats global | stats post | u32 n | n x (str speaker, stats) ]
//   | u32 param count | per param: str name, u32 rank, rank x u32 dims, f64 values
//
// str is u32 length + bytes, stats is u32 F + F f64 means + F f64 stddevs.
// Values are always stored as f64, so 32-bit models round-trip exactly too.

namespace erna {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'E', 'R', 'N', 'A', 'C', 'K', 'P', 'T'};

struct StoredParam {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Decoded checkpoint contents, independent of precision.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelParts parts;
  std::uint64_t step = 0;
  RunConfig config;
  std::optional<Normalizer> normalizer;
  std::vector<StoredParam> params;

  const StoredParam* find(std::string_view name) const {
    for (const auto& p : params)
      if (p.name == name) return &p;
    return nullptr;
  }
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  void stats(const DimStats& s) {
    u32(std::uint32_t(s.mean.size()));
    for (double v : s.mean) f64(v);
    for (double v : s.stddev) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : in_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(byte(i)) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(byte(i)) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto v = in_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  DimStats stats(const char* what) {
    const std::uint32_t F = u32(what);
    need(std::size_t(F) * 16, what);
    DimStats s{std::vector<double>(F), std::vector<double>(F)};
    for (auto& v : s.mean) v = f64(what);
    for (auto& v : s.stddev) v = f64(what);
    return s;
  }

 private:
  unsigned char byte(int i) const { return static_cast<unsigned char>(in_[pos_ + i]); }
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("truncated checkpoint while reading ") + what, in_.size());
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

inline std::uint32_t part_flags(const ModelParts& p) {
  return (p.acoustic ? 1u : 0u) | (p.lm ? 2u : 0u) | (p.fusion ? 4u : 0u);
}

}  // namespace detail

template <class Real>
std::string encode_checkpoint(const Model<Real>& m, const Normalizer* norm = nullptr) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u32(detail::part_flags(m.parts()));
  w.u64(m.step());
  w.str(m.config().to_text());
  w.u32(norm ? 1 : 0);
  if (norm) {
    w.stats(norm->global_stats());
    w.stats(norm->post_speaker_stats());
    w.u32(std::uint32_t(norm->speaker_stats().size()));
    for (const auto& [spk, s] : norm->speaker_stats()) {
      w.str(spk);
      w.stats(s);
    }
  }
  const auto params = m.params().all();
  w.u32(std::uint32_t(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.u32(std::uint32_t(p->value.shape.size()));
    for (auto d : p->value.shape) w.u32(std::uint32_t(d));
    for (Real v : p->value.data) w.f64(double(v));
  }
  return w.take();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(sizeof(kCheckpointMagic), "magic") != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)))
    throw FormatError("not an erna checkpoint (bad magic)", 0);
  Checkpoint c;
  c.version = r.u32("version");
  if (c.version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(c.version) + ", this build reads version " +
                          std::to_string(kCheckpointVersion),
                      8);
  const std::uint32_t flags = r.u32("part flags");
  if (flags == 0 || flags > 7) throw FormatError("bad checkpoint part flags " + std::to_string(flags), 12);
  c.parts = {(flags & 1) != 0, (flags & 2) != 0, (flags & 4) != 0};
  c.step = r.u64("step counter");
  const std::size_t cfg_at = r.offset();
  try {
    c.config = RunConfig::from_text(r.str("config"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad config in checkpoint: ") + e.what(), cfg_at);
  }
  if (r.u32("normalizer flag")) {
    auto global = r.stats("normalizer");
    auto post = r.stats("normalizer");
    std::map<std::string, DimStats> speakers;
    for (std::uint32_t n = r.u32("normalizer"), i = 0; i < n; ++i) {
      auto spk = r.str("normalizer speaker");
      speakers[spk] = r.stats("normalizer");
    }
    try {
      c.normalizer = Normalizer::from_stats(std::move(global), std::move(post), std::move(speakers));
    } catch (const ConfigError& e) {
      throw FormatError(std::string("bad normalizer in checkpoint: ") + e.what(), r.offset());
    }
  }
  const std::uint32_t count = r.u32("param count");
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredParam p;
    p.name = r.str("param name");
    const std::uint32_t rank = r.u32("param rank");
    if (rank > 8) throw FormatError("implausible rank " + std::to_string(rank) + " for " + p.name, r.offset());
    for (std::uint32_t k = 0; k < rank; ++k) p.shape.push_back(r.u32("param shape"));
    const std::size_t n = numel(p.shape);
    r.raw(0, "param values");
    if ((bytes.size() - r.offset()) / 8 < n) throw FormatError("truncated checkpoint while reading " + p.name, bytes.size());
    p.values.resize(n);
    for (auto& v : p.values) v = r.f64("param values");
    c.params.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.offset());
  return c;
}

/// Copies every stored tensor whose name starts with `prefix` into `ps`.
/// Shapes must match and every matching param of `ps` must be present.
template <class Real>
void load_params(const Checkpoint& c, ParamSet<Real>& ps, std::string_view prefix = "") {
  for (auto* p : ps.with_prefix(prefix)) {
    const auto* s = c.find(p->name);
    if (!s) throw FormatError("checkpoint has no parameter " + p->name, 0);
    if (s->shape != p->value.shape)
      throw FormatError("parameter " + p->name + " is " + to_string(s->shape) + " in the checkpoint but " +
                            to_string(p->value.shape) + " in the model",
                        0);
    for (std::size_t i = 0; i < s->values.size(); ++i) p->value.data[i] = Real(s->values[i]);
  }
}

/// Rebuilds the model stored in `c`.
template <class Real>
std::unique_ptr<Model<Real>> instantiate(const Checkpoint& c) {
  auto m = std::make_unique<Model<Real>>(c.config, c.parts);
  if (m->params().size() != c.params.size())
    throw FormatError("checkpoint holds " + std::to_string(c.params.size()) + " parameters, config builds " +
                          std::to_string(m->params().size()),
                      0);
  load_params(c, m->params());
  m->set_step(c.step);
  return m;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path, 0);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw FormatError("write failed for " + path, 0);
}

template <class Real>
void save_checkpoint(const std::string& path, const Model<Real>& m, const Normalizer* norm = nullptr) {
  write_file(path, encode_checkpoint(m, norm));
}

inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

/// The output layer size is fixed at training time; a vocabulary file of a
/// different size cannot be used with the checkpoint.
inline void check_vocabulary(const RunConfig& cfg, const Vocabulary& vocab) {
  if (cfg.vocab_size != vocab.num_labels())
    throw ConfigError("checkpoint was trained with " + std::to_string(cfg.vocab_size) +
                      " labels but the vocabulary file has " + std::to_string(vocab.num_labels()));
}

}  // namespace erna
