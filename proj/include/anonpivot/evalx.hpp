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
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/corpus.hpp"
#include "anonpivot/labels.hpp"
#include "anonpivot/unicode.hpp"
#include "anonpivot/words.hpp"

namespace anonpivot {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WordJudgment {
  std::size_t message_index = 0;
  std::size_t word = 0;
  std::optional<EntityLabel> predicted;
  std::optional<EntityLabel> gold;
  friend bool operator==(const WordJudgment&, const WordJudgment&) = default;
};

namespace detail {

// Label of the span covering `pos`; spans must be sorted and disjoint.
inline std::optional<EntityLabel> covering(const std::vector<Span>& spans, std::size_t& cursor,
                                           std::size_t pos) {
  while (cursor < spans.size() && spans[cursor].end <= pos) ++cursor;
  if (cursor < spans.size() && spans[cursor].start <= pos) return spans[cursor].label;
  return std::nullopt;
}

inline std::vector<Span> sorted_disjoint(std::vector<Span> spans) {
  try {
    require_non_overlapping(spans);
  } catch (const CorpusError& e) {
    throw EvalError(e.what());
  }
  std::sort(spans.begin(), spans.end(), span_position_less);
  return spans;
}

}  // namespace detail

/// One judgment per word of `text`; each side takes the label of the span
/// covering the word's first character.
inline std::vector<WordJudgment> judge_words(std::string_view text, std::vector<Span> predicted,
                                             std::vector<Span> gold, std::size_t message_index = 0) {
  predicted = detail::sorted_disjoint(std::move(predicted));
  gold = detail::sorted_disjoint(std::move(gold));
  std::vector<WordJudgment> out;
  std::size_t pc = 0, gc = 0, ordinal = 0;
  for (const auto& w : split_words_utf8(text)) {
    out.push_back({message_index, ordinal++, detail::covering(predicted, pc, w.start),
                   detail::covering(gold, gc, w.start)});
  }
  return out;
}

/// Judges two annotations of the same dialogue (identical texts).
inline std::vector<WordJudgment> judge_dialogue(const Dialogue& predicted, const Dialogue& gold) {
  if (predicted.messages.size() != gold.messages.size()) {
    throw EvalError("dialogue '" + gold.id + "' differs in message count between corpora");
  }
  std::vector<std::vector<Span>> pred_by(gold.messages.size()), gold_by(gold.messages.size());
  for (const auto& s : predicted.spans.value_or(std::vector<Span>{})) pred_by.at(s.message_index).push_back(s);
  for (const auto& s : gold.spans.value_or(std::vector<Span>{})) gold_by.at(s.message_index).push_back(s);
  std::vector<WordJudgment> out;
  for (std::size_t i = 0; i < gold.messages.size(); ++i) {
    if (predicted.messages[i].text != gold.messages[i].text) {
      throw EvalError("dialogue '" + gold.id + "' message " + std::to_string(i) +
                      " text differs between corpora");
    }
    auto j = judge_words(gold.messages[i].text, pred_by[i], gold_by[i], i);
    out.insert(out.end(), j.begin(), j.end());
  }
  return out;
}

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

/// 0/0 is taken as 1.
inline double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_score(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

struct EvalReport {
  std::map<EntityLabel, LabelCounts> per_label;
  LabelCounts total;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;

  static EvalReport from_counts(std::map<EntityLabel, LabelCounts> per_label) {
    EvalReport r;
    for (const auto& [_, c] : per_label) {
      r.total.tp += c.tp;
      r.total.fp += c.fp;
      r.total.fn += c.fn;
    }
    r.per_label = std::move(per_label);
    r.precision = safe_ratio(r.total.tp, r.total.tp + r.total.fp);
    r.recall = safe_ratio(r.total.tp, r.total.tp + r.total.fn);
    r.f1 = f1_score(r.precision, r.recall);
    return r;
  }
};

/// Pooled word-level counts. A word with mismatched labels counts as an FP
/// for the predicted label and an FN for the gold label.
inline EvalReport micro_prf(const std::vector<WordJudgment>& judgments) {
  std::map<EntityLabel, LabelCounts> counts;
  for (const auto& j : judgments) {
    if (j.predicted && j.predicted == j.gold) {
      ++counts[*j.predicted].tp;
      continue;
    }
    if (j.predicted) ++counts[*j.predicted].fp;
    if (j.gold) ++counts[*j.gold].fn;
  }
  return EvalReport::from_counts(std::move(counts));
}

/// Pairs dialogues by id; every gold dialogue must have a prediction.
inline EvalReport evaluate_corpora(const std::vector<Dialogue>& predicted,
                                   const std::vector<Dialogue>& gold) {
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : predicted) by_id[d.id] = &d;
  if (by_id.size() != predicted.size()) throw EvalError("prediction corpus has duplicate ids");
  std::vector<WordJudgment> all;
  for (const auto& g : gold) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw EvalError("no prediction for dialogue '" + g.id + "'");
    auto j = judge_dialogue(*it->second, g);
    all.insert(all.end(), j.begin(), j.end());
  }
  if (gold.size() != predicted.size()) throw EvalError("prediction corpus has dialogues missing from gold");
  return micro_prf(all);
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  auto& pl = j["per_label"] = nlohmann::ordered_json::object();
  for (auto l : kAllEntityLabels) {
    auto it = r.per_label.find(l);
    const LabelCounts c = it == r.per_label.end() ? LabelCounts{} : it->second;
    pl[std::string(wire_name(l))] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  }
  j["tp"] = r.total.tp;
  j["fp"] = r.total.fp;
  j["fn"] = r.total.fn;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  return j;
}

// ---------------------------------------------------------------------------
// Corpus text statistics

inline std::vector<Turn> turns_of(const std::vector<Dialogue>& dialogues, SpeakerRole role) {
  std::vector<Turn> out;
  for (const auto& d : dialogues) {
    for (auto& t : merge_turns(d)) {
      if (t.speaker == role) out.push_back(std::move(t));
    }
  }
  return out;
}

inline double words_per_turn(const std::vector<Dialogue>& dialogues, SpeakerRole role) {
  const auto turns = turns_of(dialogues, role);
  if (turns.empty()) throw EvalError("no " + std::string(wire_name(role)) + " turns in corpus");
  std::size_t words = 0;
  for (const auto& t : turns) words += word_count(t.text);
  return static_cast<double>(words) / static_cast<double>(turns.size());
}

/// Shannon entropy in bits of case-folded word n-grams taken within turns.
inline double ngram_entropy(const std::vector<Dialogue>& dialogues, SpeakerRole role, std::size_t n = 1) {
  if (n < 1) throw EvalError("n-gram order must be >= 1");
  std::map<std::vector<std::u32string>, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& t : turns_of(dialogues, role)) {
    const auto toks = word_tokens(unicode::fold(unicode::decode(t.text)));
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      ++counts[std::vector<std::u32string>(toks.begin() + i, toks.begin() + i + n)];
      ++total;
    }
  }
  if (total == 0) {
    throw EvalError("no " + std::to_string(n) + "-grams for " + std::string(wire_name(role)) + " turns");
  }
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

struct RoleStats {
  std::size_t turns = 0;
  std::optional<double> words_per_turn;
  std::optional<double> ngram_entropy;
};

struct TextStats {
  std::size_t total_dialogues = 0;
  std::size_t total_turns = 0;
  std::size_t n = 1;
  RoleStats student;
  RoleStats tutor;
};

/// Table-style statistics; a role with no turns (or n-grams) leaves its
/// fields empty instead of failing.
inline TextStats text_stats(const std::vector<Dialogue>& dialogues, std::size_t n = 1) {
  TextStats s;
  s.total_dialogues = dialogues.size();
  s.n = n;
  for (const auto& d : dialogues) s.total_turns += merge_turns(d).size();
  for (auto role : {SpeakerRole::Student, SpeakerRole::Tutor}) {
    auto& rs = role == SpeakerRole::Student ? s.student : s.tutor;
    rs.turns = turns_of(dialogues, role).size();
    if (rs.turns == 0) continue;
    rs.words_per_turn = words_per_turn(dialogues, role);
    try {
      rs.ngram_entropy = ngram_entropy(dialogues, role, n);
    } catch (const EvalError&) {
    }
  }
  return s;
}

inline nlohmann::ordered_json to_json(const TextStats& s) {
  auto role = [](const RoleStats& r) {
    nlohmann::ordered_json j;
    j["turns"] = r.turns;
    j["words_per_turn"] = r.words_per_turn ? nlohmann::ordered_json(*r.words_per_turn) : nlohmann::ordered_json(nullptr);
    j["ngram_entropy"] = r.ngram_entropy ? nlohmann::ordered_json(*r.ngram_entropy) : nlohmann::ordered_json(nullptr);
    return j;
  };
  nlohmann::ordered_json j;
  j["total_dialogues"] = s.total_dialogues;
  j["total_turns"] = s.total_turns;
  j["n"] = s.n;
  j["student"] = role(s.student);
  j["tutor"] = role(s.tutor);
  return j;
}

}  // namespace anonpivot
