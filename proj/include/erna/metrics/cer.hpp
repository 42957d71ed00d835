// erna/metrics/cer.hpp

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

#include <span>
#include <utility>
#include <vector>

#include "erna/error.hpp"
#include "erna/frontend/features.hpp"

namespace erna {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  EditCounts& operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_length += o.ref_length;
    return *this;
  }
  bool operator==(const EditCounts&) const = default;
};

/// Levenshtein alignment with unit costs. Among optimal alignments the
/// backtrace prefers substitution (or match), then insertion, then deletion.
inline EditCounts edit_distance(const LabelSeq& ref, const LabelSeq& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]), at(i, j - 1) + 1, at(i - 1, j) + 1});
  EditCounts c;
  c.ref_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1])) {
      c.substitutions += ref[i - 1] != hyp[j - 1];
      --i, --j;
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

struct CerReport {
  EditCounts counts;
  double cer = 0;  // percent
};

/// Corpus-level CER: 100 * sum(S + D + I) / sum(ref length).
inline CerReport cer(std::span<const std::pair<LabelSeq, LabelSeq>> pairs) {
  CerReport r;
  for (const auto& [ref, hyp] : pairs) r.counts += edit_distance(ref, hyp);
  if (r.counts.ref_length == 0) throw MetricError("CER undefined: total reference length is 0");
  r.cer = 100.0 * double(r.counts.errors()) / double(r.counts.ref_length);
  return r;
}

}  // namespace erna
