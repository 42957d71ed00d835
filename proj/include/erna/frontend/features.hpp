// erna/frontend/features.hpp

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
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "erna/error.hpp"

namespace erna {

using Label = std::uint32_t;
using LabelSeq = std::vector<Label>;

/// Frames x dims, row-major, one row per 10 ms frame.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<float> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t f) : frames(t), dims(f), values(t * f, 0.0f) {}

  float& at(std::size_t t, std::size_t f) { return values[t * dims + f]; }
  float at(std::size_t t, std::size_t f) const { return values[t * dims + f]; }
  std::span<const float> row(std::size_t t) const { return {&values[t * dims], dims}; }

  /// Throws ConfigError unless T >= 1, F >= 1 and every value is finite.
  void validate() const {
    if (frames == 0 || dims == 0)
      throw ConfigError("feature matrix must be non-empty, got " + std::to_string(frames) +
                        "x" + std::to_string(dims));
    if (values.size() != frames * dims) throw ConfigError("feature matrix size mismatch");
    for (float v : values)
      if (!std::isfinite(v)) throw NumericError("non-finite feature value");
  }
};

struct Utterance {
  std::string id;
  std::string speaker;
  FeatureMatrix features;
  LabelSeq labels;
};

// ---------------------------------------------------------------------------
// Binary feature files: "RNAF", u32 version, u32 T, u32 F, T*F f32, all LE.

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path, 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline std::string encode_features(const FeatureMatrix& m) {
  std::string out = "RNAF";
  detail::put_u32(out, kFeatureFormatVersion);
  detail::put_u32(out, std::uint32_t(m.frames));
  detail::put_u32(out, std::uint32_t(m.dims));
  out.reserve(out.size() + 4 * m.values.size());
  for (float v : m.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32(out, bits);
  }
  return out;
}

inline FeatureMatrix decode_features(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4) throw FormatError("feature file too short for magic", bytes.size());
  if (bytes.compare(0, 4, "RNAF") != 0) throw FormatError("bad feature magic", 0);
  if (bytes.size() < 16) throw FormatError("truncated feature header", bytes.size());
  const std::uint32_t version = detail::get_u32(p + 4);
  if (version != kFeatureFormatVersion)
    throw FormatError("unsupported feature version " + std::to_string(version), 4);
  FeatureMatrix m;
  m.frames = detail::get_u32(p + 8);
  m.dims = detail::get_u32(p + 12);
  if (m.frames == 0 || m.dims == 0) throw FormatError("empty feature matrix in header", 8);
  const std::size_t need = 16 + 4 * m.frames * m.dims;
  if (bytes.size() < need)
    throw FormatError("truncated feature data: header says " + std::to_string(m.frames) + "x" +
                          std::to_string(m.dims) + ", file ends early",
                      bytes.size());
  if (bytes.size() > need) throw FormatError("trailing bytes after feature data", need);
  m.values.resize(m.frames * m.dims);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const std::uint32_t bits = detail::get_u32(p + 16 + 4 * i);
    std::memcpy(&m.values[i], &bits, 4);
  }
  return m;
}

inline void save_features(const std::string& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path, 0);
  const auto bytes = encode_features(m);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

inline FeatureMatrix load_features(const std::string& path) {
  return decode_features(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Feature transforms

/// Appends delta and delta-delta: [T x F] -> [T x 3F], with
/// delta_t = (f_{t+1} - f_{t-1}) / 2 and edge frames repeated.
inline FeatureMatrix add_deltas(const FeatureMatrix& in) {
  const std::size_t T = in.frames, F = in.dims;
  if (T == 0) throw ConfigError("add_deltas: no frames");
  auto diff = [T, F](const FeatureMatrix& x, std::size_t col0, FeatureMatrix& out,
                     std::size_t out_col0) {
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t next = std::min(t + 1, T - 1), prev = t == 0 ? 0 : t - 1;
      for (std::size_t f = 0; f < F; ++f)
        out.at(t, out_col0 + f) = (x.at(next, col0 + f) - x.at(prev, col0 + f)) / 2.0f;
    }
  };
  FeatureMatrix out(T, 3 * F);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f) out.at(t, f) = in.at(t, f);
  diff(in, 0, out, F);
  diff(out, F, out, 2 * F);
  return out;
}

/// Row t' concatenates frames t'*s .. t'*s+k-1 (zero past the end); the
/// result has ceil(T/s) rows of k*F values.
inline FeatureMatrix stack_frames(const FeatureMatrix& in, std::size_t k, std::size_t s) {
  if (k == 0 || s == 0) throw ConfigError("stack_frames: stack and stride must be >= 1");
  const std::size_t rows = (in.frames + s - 1) / s;
  FeatureMatrix out(rows, k * in.dims);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t t = r * s + j;
      if (t >= in.frames) break;
      std::copy_n(&in.values[t * in.dims], in.dims, &out.values[(r * k + j) * in.dims]);
    }
  return out;
}

/// Nearest-frame time stretch: output frame t copies input frame
/// floor((t + phase) / factor), for round(T * factor) frames (at least 1).
inline FeatureMatrix resample_frames(const FeatureMatrix& in, double factor, double phase = 0.0) {
  if (!(factor > 0)) throw ConfigError("resample_frames: factor must be > 0");
  if (in.frames == 0) throw ConfigError("resample_frames: no frames");
  const std::size_t T = std::max<std::size_t>(1, std::size_t(std::lround(double(in.frames) * factor)));
  FeatureMatrix out(T, in.dims);
  for (std::size_t t = 0; t < T; ++t) {
    const auto src = std::min(in.frames - 1, std::size_t(std::max(0.0, (double(t) + phase) / factor)));
    std::copy_n(&in.values[src * in.dims], in.dims, &out.values[t * in.dims]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

enum class NormMode { kPerSpeaker, kGlobal };

struct DimStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kStdFloor = 1e-8;

/// Mean/std statistics fitted on a training partition. Per-speaker mode
/// applies the speaker's stats first and then global stats measured on the
/// speaker-normalized data; unknown speakers fall back to raw global stats.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(const Normalizer& o)
      : speakers_(o.speakers_), global_(o.global_), post_speaker_(o.post_speaker_) {}
  Normalizer& operator=(const Normalizer& o) {
    speakers_ = o.speakers_;
    global_ = o.global_;
    post_speaker_ = o.post_speaker_;
    return *this;
  }

  static Normalizer fit(std::span<const Utterance> train) {
    if (train.empty()) throw ConfigError("normalizer needs at least one training utterance");
    Normalizer n;
    std::map<std::string, std::vector<const FeatureMatrix*>> by_speaker;
    std::vector<const FeatureMatrix*> all;
    for (const auto& u : train) {
      by_speaker[u.speaker].push_back(&u.features);
      all.push_back(&u.features);
    }
    n.global_ = stats_of(all);
    for (const auto& [spk, mats] : by_speaker) n.speakers_[spk] = stats_of(mats);
    std::vector<FeatureMatrix> spk_normed;
    spk_normed.reserve(train.size());
    for (const auto& u : train)
      spk_normed.push_back(apply_stats(u.features, n.speakers_.at(u.speaker)));
    std::vector<const FeatureMatrix*> ptrs;
    for (const auto& m : spk_normed) ptrs.push_back(&m);
    n.post_speaker_ = stats_of(ptrs);
    return n;
  }

  FeatureMatrix apply(const FeatureMatrix& x, const std::string& speaker, NormMode mode) const {
    if (mode == NormMode::kGlobal) return apply_stats(x, global_);
    auto it = speakers_.find(speaker);
    if (it == speakers_.end()) {
      ++fallbacks_;
      return apply_stats(x, global_);
    }
    return apply_stats(apply_stats(x, it->second), post_speaker_);
  }

  /// Number of per-speaker lookups that fell back to global stats.
  std::size_t fallback_count() const { return fallbacks_.load(); }

  const DimStats& global_stats() const { return global_; }
  const DimStats& post_speaker_stats() const { return post_speaker_; }
  const std::map<std::string, DimStats>& speaker_stats() const { return speakers_; }

  /// Rebuilds a fitted normalizer from stored statistics.
  static Normalizer from_stats(DimStats global, DimStats post_speaker,
                               std::map<std::string, DimStats> speakers) {
    auto check = [&](const DimStats& d) {
      if (d.mean.size() != global.mean.size() || d.stddev.size() != global.mean.size())
        throw ConfigError("normalizer: inconsistent stat dims");
    };
    check(global);
    check(post_speaker);
    for (const auto& [spk, d] : speakers) check(d);
    Normalizer n;
    n.global_ = std::move(global);
    n.post_speaker_ = std::move(post_speaker);
    n.speakers_ = std::move(speakers);
    return n;
  }

 private:
  static DimStats stats_of(const std::vector<const FeatureMatrix*>& mats) {
    const std::size_t F = mats.front()->dims;
    DimStats s{std::vector<double>(F, 0.0), std::vector<double>(F, 0.0)};
    std::size_t n = 0;
    for (const auto* m : mats) {
      if (m->dims != F) throw ConfigError("normalizer: inconsistent feature dims");
      for (std::size_t t = 0; t < m->frames; ++t)
        for (std::size_t f = 0; f < F; ++f) s.mean[f] += m->at(t, f);
      n += m->frames;
    }
    for (auto& v : s.mean) v /= double(n);
    for (const auto* m : mats)
      for (std::size_t t = 0; t < m->frames; ++t)
        for (std::size_t f = 0; f < F; ++f) {
          const double c = m->at(t, f) - s.mean[f];
          s.stddev[f] += c * c;
        }
    for (auto& v : s.stddev) v = std::max(std::sqrt(v / double(n)), kStdFloor);
    return s;
  }

  static FeatureMatrix apply_stats(const FeatureMatrix& x, const DimStats& s) {
    if (x.dims != s.mean.size())
      throw ConfigError("normalizer fitted on " + std::to_string(s.mean.size()) +
                        " dims applied to " + std::to_string(x.dims));
    FeatureMatrix out = x;
    for (std::size_t t = 0; t < x.frames; ++t)
      for (std::size_t f = 0; f < x.dims; ++f)
        out.at(t, f) = float((double(x.at(t, f)) - s.mean[f]) / s.stddev[f]);
    return out;
  }

  std::map<std::string, DimStats> speakers_;
  DimStats global_;
  DimStats post_speaker_;
  mutable std::atomic<std::size_t> fallbacks_{0};
};

}  // namespace erna
