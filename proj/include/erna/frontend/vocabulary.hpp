// erna/frontend/vocabulary.hpp

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

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/features.hpp"

namespace erna {

/// L real labels with ids 0..L-1 plus an implicit blank with id L.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (!seen.insert(labels_[i]).second)
        throw FormatError("duplicate vocabulary label '" + labels_[i] + "'", i + 1);
  }

  /// Synthetic vocabulary "a", "b", ... (or "u<i>" past 26 labels).
  static Vocabulary of_size(std::size_t L) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < L; ++i)
      labels.push_back(L <= 26 ? std::string(1, char('a' + i)) : "u" + std::to_string(i));
    return Vocabulary(std::move(labels));
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open vocabulary " + path, 0);
    std::vector<std::string> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw FormatError("empty vocabulary line in " + path, lineno);
      labels.push_back(line);
    }
    if (labels.empty()) throw FormatError("empty vocabulary " + path, 0);
    return Vocabulary(std::move(labels));
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path, 0);
    for (const auto& l : labels_) out << l << '\n';
  }

  /// Number of real labels L.
  std::size_t num_labels() const { return labels_.size(); }
  /// Output units L + 1.
  std::size_t num_units() const { return labels_.size() + 1; }
  Label blank() const { return Label(labels_.size()); }
  bool is_blank(Label id) const { return id == blank(); }
  const std::string& label(Label id) const {
    if (id >= labels_.size()) throw VocabularyError("no label with id " + std::to_string(id));
    return labels_[id];
  }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

// ---------------------------------------------------------------------------
// Manifest lines: <feature-path>\t<speaker-id>\t<space-separated label ids>

struct ManifestEntry {
  std::string feature_path;
  std::string speaker;
  LabelSeq labels;
};

inline LabelSeq parse_label_ids(const std::string& text, std::size_t lineno) {
  LabelSeq out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw FormatError("bad label id '" + tok + "'", lineno);
    out.push_back(Label(v));
  }
  return out;
}

inline std::string format_label_ids(const LabelSeq& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? " " : "") + std::to_string(labels[i]);
  return s;
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path, 0);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw FormatError("manifest line needs 3 tab-separated fields in " + path, lineno);
    out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                   parse_label_ids(line.substr(t2 + 1), lineno)});
  }
  return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path, 0);
  for (const auto& e : entries)
    out << e.feature_path << '\t' << e.speaker << '\t' << format_label_ids(e.labels) << '\n';
}

/// Checks every label id is a real label (blank never appears in targets).
inline void validate_labels(const LabelSeq& labels, const Vocabulary& vocab) {
  for (Label l : labels)
    if (l >= vocab.num_labels())
      throw VocabularyError("target label " + std::to_string(l) + " outside vocabulary of " +
                            std::to_string(vocab.num_labels()) + " labels");
}

}  // namespace erna
