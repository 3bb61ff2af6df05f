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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/corpus.hpp"
#include "anonpivot/labels.hpp"
#include "anonpivot/llm_client.hpp"
#include "anonpivot/unicode.hpp"

namespace anonpivot {

class CurateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LengthThresholds {
  std::size_t min_total = 20;
  std::size_t min_each = 7;  // per participant
};

inline bool passes_length(const Dialogue& d, const LengthThresholds& t) {
  std::size_t student = 0, tutor = 0;
  for (const auto& m : d.messages) ++(m.speaker == SpeakerRole::Student ? student : tutor);
  return d.messages.size() >= t.min_total && student >= t.min_each && tutor >= t.min_each;
}

inline std::vector<Dialogue> filter_by_length(const std::vector<Dialogue>& dialogues,
                                              const LengthThresholds& t = {}) {
  std::vector<Dialogue> kept;
  for (const auto& d : dialogues) {
    if (passes_length(d, t)) kept.push_back(d);
  }
  return kept;
}

struct BlocklistOutcome {
  std::vector<Dialogue> kept;
  std::vector<std::string> dropped_ids;
};

/// Drops dialogues whose text contains any blocklisted term (case-insensitive
/// substring), e.g. email domains or school names.
inline BlocklistOutcome filter_by_blocklist(const std::vector<Dialogue>& dialogues,
                                            const std::vector<std::string>& terms) {
  std::vector<std::u32string> folded;
  for (const auto& t : terms) {
    if (!t.empty()) folded.push_back(unicode::fold(unicode::decode(t)));
  }
  BlocklistOutcome out;
  for (const auto& d : dialogues) {
    bool hit = false;
    for (const auto& m : d.messages) {
      const auto text = unicode::fold(unicode::decode(m.text));
      hit = std::any_of(folded.begin(), folded.end(),
                        [&](const std::u32string& t) { return text.find(t) != std::u32string::npos; });
      if (hit) break;
    }
    if (hit) out.dropped_ids.push_back(d.id);
    else out.kept.push_back(d);
  }
  return out;
}

struct FlaggedDialogue {
  std::string id;
  std::vector<std::size_t> message_indices;
  std::set<std::string> categories;
};

struct ModerationOutcome {
  std::vector<Dialogue> kept;
  std::vector<FlaggedDialogue> flagged;
};

/// A service failure mid-run. `partial` holds every dialogue decided before
/// the failure; `processed` counts them.
class ModerationAborted : public std::runtime_error {
 public:
  ModerationAborted(const std::string& what, ModerationOutcome partial, std::size_t processed)
      : std::runtime_error(what), partial_(std::move(partial)), processed_(processed) {}
  const ModerationOutcome& partial() const { return partial_; }
  std::size_t processed() const { return processed_; }

 private:
  ModerationOutcome partial_;
  std::size_t processed_;
};

/// A dialogue is flagged when any of its messages is; categories are the
/// union over its flagged messages.
inline ModerationOutcome filter_by_moderation(const std::vector<Dialogue>& dialogues,
                                              llm::ModerationClient& client) {
  ModerationOutcome out;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const auto& d = dialogues[i];
    FlaggedDialogue f{d.id, {}, {}};
    try {
      for (const auto& m : d.messages) {
        if (m.degenerate()) continue;
        const auto v = client.moderate(m.text);
        if (v.flagged) {
          f.message_indices.push_back(m.index);
          f.categories.insert(v.categories.begin(), v.categories.end());
        }
      }
    } catch (const llm::ServiceError& e) {
      throw ModerationAborted(std::string("moderation failed on dialogue '") + d.id + "': " + e.what(),
                              std::move(out), i);
    }
    if (f.message_indices.empty()) out.kept.push_back(d);
    else out.flagged.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TF-IDF over talk moves

struct CurationScore {
  std::string dialogue_id;
  std::optional<std::string> question_id;
  double tfidf = 0.0;
  std::map<TalkMoveLabel, std::size_t> label_counts;
};

inline std::set<TalkMoveLabel> default_excluded_moves() {
  return {TalkMoveLabel::None, TalkMoveLabel::GettingStudentsToRelate};
}

/// Document frequency of each label across the scored dialogues.
inline std::map<TalkMoveLabel, std::size_t> document_frequencies(const std::vector<CurationScore>& scores) {
  std::map<TalkMoveLabel, std::size_t> df;
  for (const auto& s : scores) {
    for (const auto& [l, c] : s.label_counts) {
      if (c) ++df[l];
    }
  }
  return df;
}

/// sum over labels of (count/|d|) * ln(N/df).
inline double tfidf_from_counts(const std::map<TalkMoveLabel, std::size_t>& counts,
                                const std::map<TalkMoveLabel, std::size_t>& df, std::size_t n_docs) {
  std::size_t size = 0;
  for (const auto& [_, c] : counts) size += c;
  if (size == 0) return 0.0;
  double score = 0.0;
  for (const auto& [l, c] : counts) {
    if (c == 0) continue;
    const auto f = df.at(l);
    score += (static_cast<double>(c) / static_cast<double>(size)) *
             std::log(static_cast<double>(n_docs) / static_cast<double>(f));
  }
  return score;
}

inline std::vector<CurationScore> tfidf_scores(const std::vector<Dialogue>& dialogues,
                                               const std::set<TalkMoveLabel>& excluded = default_excluded_moves()) {
  std::vector<CurationScore> scores;
  scores.reserve(dialogues.size());
  for (const auto& d : dialogues) {
    if (!d.talk_moves) throw CurateError("dialogue '" + d.id + "' has no talk_moves");
    CurationScore s{d.id, d.question_id, 0.0, {}};
    for (auto t : *d.talk_moves) {
      if (!excluded.count(t)) ++s.label_counts[t];
    }
    scores.push_back(std::move(s));
  }
  const auto df = document_frequencies(scores);
  for (auto& s : scores) s.tfidf = tfidf_from_counts(s.label_counts, df, scores.size());
  return scores;
}

// ---------------------------------------------------------------------------
// Greedy downsampling

struct SelectionConstraints {
  std::size_t max_per_dq = 8;
  std::size_t max_unique_dq = 1000;
  std::size_t target_size = 2000;
};

struct Selection {
  std::size_t rank = 0;  // 1-based pick order
  std::string dialogue_id;
  std::string question_id;
  double score = 0.0;
};

/// Repeatedly picks the highest-scoring dialogue that keeps both DQ limits,
/// ties broken by id. Feasibility only shrinks as the selection grows, so a
/// single pass in (score desc, id asc) order makes the same picks.
inline std::vector<Selection> greedy_downsample(const std::vector<CurationScore>& scores,
                                                const SelectionConstraints& c = {}) {
  if (c.max_per_dq == 0 || c.max_unique_dq == 0 || c.target_size == 0) {
    throw CurateError("selection constraints must be positive");
  }
  std::vector<const CurationScore*> order;
  for (const auto& s : scores) {
    if (!s.question_id) throw CurateError("dialogue '" + s.dialogue_id + "' has no question_id");
    order.push_back(&s);
  }
  std::sort(order.begin(), order.end(), [](const CurationScore* a, const CurationScore* b) {
    if (a->tfidf != b->tfidf) return a->tfidf > b->tfidf;
    return a->dialogue_id < b->dialogue_id;
  });
  std::map<std::string, std::size_t> per_dq;
  std::vector<Selection> out;
  for (const auto* s : order) {
    if (out.size() >= c.target_size) break;
    auto it = per_dq.find(*s->question_id);
    const std::size_t have = it == per_dq.end() ? 0 : it->second;
    if (have + 1 > c.max_per_dq) continue;
    if (have == 0 && per_dq.size() + 1 > c.max_unique_dq) continue;
    ++per_dq[*s->question_id];
    out.push_back({out.size() + 1, s->dialogue_id, *s->question_id, s->tfidf});
  }
  return out;
}

inline nlohmann::ordered_json to_json(const Selection& s) {
  return {{"id", s.dialogue_id}, {"question_id", s.question_id}, {"score", s.score}, {"rank", s.rank}};
}

}  // namespace anonpivot
