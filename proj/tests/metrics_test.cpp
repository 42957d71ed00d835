// tests/metrics_test.cpp

// Copyright 2026  The erna authors

// See ../LICENSE for clarification regarding multiple authors
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

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <vector>

#include "erna/metrics/cer.hpp"
#include "erna/numeric/random.hpp"

namespace erna {
namespace {

LabelSeq seq(const char* s) {
  LabelSeq out;
  for (; *s; ++s) out.push_back(Label(*s - 'a'));
  return out;
}

TEST(EditDistanceTest, Examples) {
  EXPECT_EQ(edit_distance(seq("abc"), seq("abc")), (EditCounts{0, 0, 0, 3}));
  EXPECT_EQ(edit_distance(seq("abc"), seq("abd")), (EditCounts{1, 0, 0, 3}));
  EXPECT_EQ(edit_distance(seq("abc"), seq("")), (EditCounts{0, 3, 0, 3}));
  EXPECT_EQ(edit_distance(seq(""), seq("ab")), (EditCounts{0, 0, 2, 0}));
}

TEST(EditDistanceTest, TiesPreferSubstitution) {
  // "ab" -> "ba": two substitutions or one insertion plus one deletion.
  EXPECT_EQ(edit_distance(seq("ab"), seq("ba")), (EditCounts{2, 0, 0, 2}));
}

/// Plain recursion over prefixes with memoization; independent of the
/// table-filling implementation.
std::size_t oracle(const LabelSeq& a, const LabelSeq& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<std::size_t(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    int& m = memo[i][j];
    if (m >= 0) return std::size_t(m);
    const std::size_t best = std::min({rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]), rec(i - 1, j) + 1, rec(i, j - 1) + 1});
    m = int(best);
    return best;
  };
  return rec(a.size(), b.size());
}

std::vector<LabelSeq> all_sequences(std::size_t max_len, std::size_t alphabet) {
  std::vector<LabelSeq> out{{}};
  for (std::size_t begin = 0, len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i)
      for (Label s = 0; s < alphabet; ++s) {
        auto x = out[i];
        x.push_back(s);
        out.push_back(std::move(x));
      }
    begin = end;
  }
  return out;
}

TEST(EditDistanceTest, MatchesRecursiveOracleExhaustively) {
  const auto seqs = all_sequences(6, 3);
  ASSERT_EQ(seqs.size(), 1093u);
  std::size_t checked = 0;
  for (const auto& a : seqs)
    for (const auto& b : seqs) {
      const auto c = edit_distance(a, b);
      ASSERT_EQ(c.errors(), oracle(a, b));
      // Lengths are consistent with the reported operations.
      ASSERT_EQ(a.size() + c.insertions, b.size() + c.deletions);
      ASSERT_LE(c.deletions, a.size());
      ++checked;
    }
  EXPECT_EQ(checked, 1093u * 1093u);
}

TEST(EditDistanceTest, Properties) {
  Rng rng(1);
  auto random_seq = [&] {
    LabelSeq s(uniform_int(rng, 0, 8));
    for (auto& v : s) v = Label(uniform_int(rng, 0, 3));
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = random_seq(), y = random_seq(), z = random_seq();
    EXPECT_EQ(edit_distance(x, x).errors(), 0u);
    const auto xy = edit_distance(x, y), yx = edit_distance(y, x);
    EXPECT_EQ(xy.errors(), yx.errors());
    // Swapping the arguments exchanges the roles of deletions and insertions.
    EXPECT_EQ(long(xy.deletions) - long(xy.insertions), long(yx.insertions) - long(yx.deletions));
    EXPECT_LE(xy.errors(), edit_distance(x, z).errors() + edit_distance(z, y).errors());
  }
}

TEST(CerTest, Examples) {
  const std::vector<std::pair<LabelSeq, LabelSeq>> perfect{{seq("abc"), seq("abc")}, {seq("b"), seq("b")}};
  EXPECT_EQ(cer(perfect).cer, 0.0);
  const std::vector<std::pair<LabelSeq, LabelSeq>> one_sub{{seq("abcabcabca"), seq("abcabcabcb")}};
  EXPECT_EQ(cer(one_sub).cer, 10.0);
  const std::vector<std::pair<LabelSeq, LabelSeq>> ins{{seq("a"), seq("bb")}};
  EXPECT_EQ(cer(ins).cer, 200.0);
  const std::vector<std::pair<LabelSeq, LabelSeq>> empty{{seq(""), seq("a")}};
  EXPECT_THROW(cer(empty), MetricError);
}

TEST(CerTest, PooledNotAveraged) {
  // Per-utterance mean would be (100 + 0) / 2 = 50; pooled is 1 / 5 = 20.
  const std::vector<std::pair<LabelSeq, LabelSeq>> pairs{{seq("a"), seq("b")}, {seq("abcd"), seq("abcd")}};
  const auto r = cer(pairs);
  EXPECT_EQ(r.cer, 20.0);
  EXPECT_EQ(r.counts, (EditCounts{1, 0, 0, 5}));
}

}  // namespace
}  // namespace erna
