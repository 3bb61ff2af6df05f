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
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <regex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/analysis.hpp"
#include "anonpivot/labels.hpp"
#include "anonpivot/unicode.hpp"
#include "anonpivot/words.hpp"

namespace anonpivot {

class RulesConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Most specific label first.
inline std::vector<EntityLabel> default_label_priority() {
  return {EntityLabel::EmailSocial, EntityLabel::Url,        EntityLabel::PhoneNumber,
          EntityLabel::DateOfBirth, EntityLabel::SchoolName, EntityLabel::LocationAddress,
          EntityLabel::Name};
}

/// Patterns are ECMAScript regular expressions over the UTF-8 text;
/// gazetteer entries match whole words (a match may not be preceded or
/// followed by a letter, digit or symbol).
struct RulesConfig {
  std::map<EntityLabel, std::vector<std::string>> patterns;
  std::map<EntityLabel, std::vector<std::string>> gazetteers;
  bool case_insensitive = true;
  std::vector<EntityLabel> priority = default_label_priority();
};

/// Parses a rules document. `base_dir` resolves `gazetteer_files` entries,
/// which name one-entry-per-line word lists.
inline RulesConfig rules_config_from_json(const nlohmann::json& j,
                                          const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw RulesConfigError("rules config must be a JSON object");
  RulesConfig cfg;
  try {
    if (j.contains("case_insensitive")) cfg.case_insensitive = j.at("case_insensitive").get<bool>();
    if (j.contains("priority")) {
      cfg.priority.clear();
      for (const auto& p : j.at("priority")) cfg.priority.push_back(parse_entity_label(p.get<std::string>()));
      std::set<EntityLabel> uniq(cfg.priority.begin(), cfg.priority.end());
      if (uniq.size() != cfg.priority.size() || uniq.size() != kAllEntityLabels.size()) {
        throw RulesConfigError("priority must list every label exactly once");
      }
    }
    if (j.contains("patterns")) {
      for (const auto& [k, v] : j.at("patterns").items()) {
        auto& dst = cfg.patterns[parse_entity_label(k)];
        for (const auto& p : v) dst.push_back(p.get<std::string>());
      }
    }
    if (j.contains("gazetteers")) {
      for (const auto& [k, v] : j.at("gazetteers").items()) {
        auto& dst = cfg.gazetteers[parse_entity_label(k)];
        for (const auto& p : v) dst.push_back(p.get<std::string>());
      }
    }
    if (j.contains("gazetteer_files")) {
      for (const auto& [k, v] : j.at("gazetteer_files").items()) {
        auto& dst = cfg.gazetteers[parse_entity_label(k)];
        const auto path = base_dir / v.get<std::string>();
        std::ifstream in(path);
        if (!in) throw RulesConfigError("cannot read gazetteer file '" + path.string() + "'");
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
          dst.push_back(line);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw RulesConfigError(std::string("malformed rules config: ") + e.what());
  } catch (const UnknownWireName& e) {
    throw RulesConfigError(e.what());
  }
  return cfg;
}

inline RulesConfig load_rules_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RulesConfigError("cannot open rules config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw RulesConfigError("rules config '" + path.string() + "': " + e.what());
  }
  return rules_config_from_json(j, path.parent_path());
}

/// Candidate entity found by one rule, in scalar-value offsets.
struct RuleMatch {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityLabel label = EntityLabel::Name;
};

/// Pattern and gazetteer recognizer. Immutable after construction, so
/// concurrent recognize() calls are safe.
class RuleRecognizer final : public Recognizer {
 public:
  explicit RuleRecognizer(RulesConfig cfg) : case_insensitive_(cfg.case_insensitive) {
    for (std::size_t rank = 0; rank < cfg.priority.size(); ++rank) {
      rank_[static_cast<std::size_t>(cfg.priority[rank])] = rank;
    }
    auto flags = std::regex::ECMAScript | std::regex::optimize;
    if (case_insensitive_) flags |= std::regex::icase;
    for (const auto& [label, list] : cfg.patterns) {
      for (const auto& p : list) {
        try {
          patterns_.push_back({std::regex(p, flags), label});
        } catch (const std::regex_error& e) {
          throw RulesConfigError("invalid pattern for " + std::string(wire_name(label)) +
                                 " '" + p + "': " + e.what());
        }
      }
    }
    for (const auto& [label, list] : cfg.gazetteers) {
      for (const auto& entry : list) {
        auto key = prepare(unicode::decode(entry));
        if (key.empty()) continue;
        lengths_.insert(key.size());
        gazetteer_[key].insert(label);
      }
    }
  }

  /// All candidate matches in `text`, possibly overlapping.
  std::vector<RuleMatch> find_matches(std::string_view utf8) const {
    const auto text = unicode::decode(utf8);
    std::vector<RuleMatch> out;
    if (!patterns_.empty()) {
      // byte offset -> index of the scalar value containing that byte
      std::vector<std::size_t> cp_at(utf8.size() + 1, text.size());
      std::size_t cp = 0;
      for (std::size_t b = 0; b < utf8.size(); ++b) {
        const bool continuation = (static_cast<unsigned char>(utf8[b]) & 0xC0) == 0x80;
        cp_at[b] = continuation ? cp - 1 : cp++;
      }
      const std::string s(utf8);
      for (const auto& p : patterns_) {
        for (auto it = std::sregex_iterator(s.begin(), s.end(), p.re); it != std::sregex_iterator(); ++it) {
          const auto pos = static_cast<std::size_t>(it->position());
          const auto len = static_cast<std::size_t>(it->length());
          if (len == 0) continue;
          out.push_back({cp_at[pos], scalar_end(cp_at, utf8, pos + len), p.label});
        }
      }
    }
    if (!gazetteer_.empty()) {
      const auto folded = prepare_text(text);
      for (std::size_t s = 0; s < folded.size(); ++s) {
        if (!unicode::is_word_char(text[s]) || (s > 0 && unicode::is_word_char(text[s - 1]))) continue;
        for (auto len : lengths_) {
          const auto e = s + len;
          if (e > folded.size()) break;
          if (e < text.size() && unicode::is_word_char(text[e])) continue;
          auto hit = gazetteer_.find(folded.substr(s, len));
          if (hit == gazetteer_.end()) continue;
          for (auto label : hit->second) out.push_back({s, e, label});
        }
      }
    }
    return out;
  }

  /// One token per word; a word intersecting several matches takes the
  /// highest-priority label among them.
  std::vector<TokenLabel> recognize(const ContextWindow& window) const override {
    const auto text = unicode::decode(window.target.text);
    const auto matches = find_matches(window.target.text);
    std::vector<TokenLabel> tokens;
    for (const auto& w : split_words(text)) {
      IoTag best;
      for (const auto& m : matches) {
        if (m.start < w.end && w.start < m.end) {
          if (!best || rank(m.label) < rank(*best)) best = m.label;
        }
      }
      tokens.push_back({unicode::encode(std::u32string_view(text).substr(w.start, w.end - w.start)),
                        w.start, w.end, best});
    }
    return tokens;
  }

  SpanSource source() const override { return SpanSource::Rule; }

 private:
  struct Pattern {
    std::regex re;
    EntityLabel label;
  };

  // Exclusive scalar end for a byte end; rounds up when a match stops
  // inside a multibyte sequence.
  static std::size_t scalar_end(const std::vector<std::size_t>& cp_at, std::string_view utf8,
                                std::size_t byte_end) {
    if (byte_end >= utf8.size()) return cp_at[utf8.size()];
    const bool continuation = (static_cast<unsigned char>(utf8[byte_end]) & 0xC0) == 0x80;
    return continuation ? cp_at[byte_end] + 1 : cp_at[byte_end];
  }

  std::size_t rank(EntityLabel l) const { return rank_[static_cast<std::size_t>(l)]; }

  // Entry key: folded when case-insensitive, whitespace runs collapsed.
  std::u32string prepare(std::u32string_view s) const {
    if (case_insensitive_) return unicode::normalize(s);
    std::u32string raw;
    bool space = false;
    for (char32_t c : s) {
      if (unicode::is_whitespace(c)) {
        space = !raw.empty();
        continue;
      }
      if (space) raw.push_back(U' ');
      space = false;
      raw.push_back(c);
    }
    return raw;
  }

  // Same length as the input so offsets carry over.
  std::u32string prepare_text(std::u32string_view s) const {
    std::u32string out(s);
    for (auto& c : out) {
      if (unicode::is_whitespace(c)) c = U' ';
      else if (case_insensitive_) c = unicode::fold(c);
    }
    return out;
  }

  bool case_insensitive_;
  std::size_t rank_[kAllEntityLabels.size()]{};
  std::vector<Pattern> patterns_;
  std::unordered_map<std::u32string, std::set<EntityLabel>> gazetteer_;
  std::set<std::size_t> lengths_;
};

inline std::unique_ptr<Recognizer> rule_recognizer(RulesConfig cfg) {
  return std::make_unique<RuleRecognizer>(std::move(cfg));
}

}  // namespace anonpivot
