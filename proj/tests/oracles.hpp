// Copyright 2026 The anonpivot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Independent reference implementations used to check the library. They
// favour obviousness over speed and share no code paths with the checked
// functions beyond UTF-8 decoding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "anonpivot/corpus.hpp"
#include "anonpivot/curate.hpp"
#include "anonpivot/unicode.hpp"

namespace anonpivot::oracle {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Per-character label array built by painting every span.
inline std::vector<std::optional<EntityLabel>> paint(std::size_t len, const std::vector<Span>& spans,
                                                     std::size_t mi) {
  std::vector<std::optional<EntityLabel>> lab(len);
  for (const auto& s : spans) {
    if (s.message_index != mi) continue;
    for (std::size_t c = s.start; c < s.end; ++c) lab[c] = s.label;
  }
  return lab;
}

inline bool is_space(char32_t c) { return unicode::is_whitespace(c); }

/// Enumerates every word of every message and counts matches directly.
inline std::map<EntityLabel, Counts> brute_force_counts(const std::vector<Dialogue>& pred,
                                                        const std::vector<Dialogue>& gold) {
  std::map<EntityLabel, Counts> out;
  for (std::size_t di = 0; di < gold.size(); ++di) {
    const auto& g = gold[di];
    const Dialogue* p = nullptr;
    for (const auto& cand : pred) {
      if (cand.id == g.id) p = &cand;
    }
    for (std::size_t mi = 0; mi < g.messages.size(); ++mi) {
      const auto text = unicode::decode(g.messages[mi].text);
      const auto pl = paint(text.size(), p->spans.value_or(std::vector<Span>{}), mi);
      const auto gl = paint(text.size(), g.spans.value_or(std::vector<Span>{}), mi);
      for (std::size_t c = 0; c < text.size(); ++c) {
        const bool word_start = !is_space(text[c]) && (c == 0 || is_space(text[c - 1]));
        if (!word_start) continue;
        if (pl[c] && pl[c] == gl[c]) {
          out[*pl[c]].tp++;
        } else {
          if (pl[c]) out[*pl[c]].fp++;
          if (gl[c]) out[*gl[c]].fn++;
        }
      }
    }
  }
  return out;
}

/// Greedy selection re-deriving the feasible set from scratch at each step.
inline std::vector<std::string> naive_greedy(const std::vector<CurationScore>& scores,
                                             const SelectionConstraints& c) {
  std::vector<std::string> picked;
  std::set<std::size_t> used;
  while (picked.size() < c.target_size) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (used.count(i)) continue;
      std::size_t same = 0;
      std::set<std::string> dqs;
      for (auto u : used) {
        dqs.insert(*scores[u].question_id);
        if (*scores[u].question_id == *scores[i].question_id) ++same;
      }
      dqs.insert(*scores[i].question_id);
      if (same + 1 > c.max_per_dq || dqs.size() > c.max_unique_dq) continue;
      if (!best || scores[i].tfidf > scores[*best].tfidf ||
          (scores[i].tfidf == scores[*best].tfidf && scores[i].dialogue_id < scores[*best].dialogue_id)) {
        best = i;
      }
    }
    if (!best) break;
    used.insert(*best);
    picked.push_back(scores[*best].dialogue_id);
  }
  return picked;
}

/// Full-matrix Levenshtein.
inline std::size_t levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> m(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) m[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) m[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      m[i][j] = std::min({m[i - 1][j] + 1, m[i][j - 1] + 1, m[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    }
  }
  return m[a.size()][b.size()];
}

inline double entropy_from_counts(const std::vector<double>& counts) {
  double total = 0;
  for (double c : counts) total += c;
  double h = 0;
  for (double c : counts) h -= (c / total) * std::log2(c / total);
  return h;
}

}  // namespace anonpivot::oracle
