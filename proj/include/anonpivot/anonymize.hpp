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
#include <cctype>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/corpus.hpp"
#include "anonpivot/labels.hpp"
#include "anonpivot/llm_client.hpp"
#include "anonpivot/unicode.hpp"

namespace anonpivot {

/// Labels replaced by a fixed placeholder instead of a generated surrogate.
constexpr bool is_obfuscated_label(EntityLabel l) {
  return l == EntityLabel::Url || l == EntityLabel::EmailSocial;
}

class AnonymizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string obfuscate_verifiable(const Span& span) {
  switch (span.label) {
    case EntityLabel::Url: return "[URL]";
    case EntityLabel::EmailSocial: return "[EMAIL_SOCIAL]";
    default:
      throw AnonymizeError("label " + std::string(wire_name(span.label)) +
                           " is not obfuscated");
  }
}

// ---------------------------------------------------------------------------
// Grouping

struct EntityGroup {
  EntityLabel label = EntityLabel::Name;
  std::string canonical;  // case-folded, whitespace-collapsed surface
  std::string display;    // surface of the first occurrence
  std::vector<Span> occurrences;
};

inline std::string span_surface(const Dialogue& d, const Span& s) {
  return unicode::substr(d.messages.at(s.message_index).text, s.start, s.end);
}

/// Groups spans by (label, normalized surface), ordered by first occurrence.
inline std::vector<EntityGroup> group_entities(const Dialogue& d, std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end(), span_position_less);
  std::vector<EntityGroup> groups;
  std::map<std::pair<EntityLabel, std::string>, std::size_t> index;
  for (const auto& s : spans) {
    auto surface = span_surface(d, s);
    auto canonical = unicode::normalize_utf8(surface);
    auto [it, inserted] = index.try_emplace({s.label, canonical}, groups.size());
    if (inserted) groups.push_back({s.label, std::move(canonical), std::move(surface), {}});
    groups[it->second].occurrences.push_back(s);
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Prompting

using LabelGuidance = std::map<EntityLabel, std::string>;

inline LabelGuidance default_guidance() {
  return {
      {EntityLabel::Name, "When anonymizing names, preserve their gender and ethnic background."},
      {EntityLabel::LocationAddress,
       "Use a different place of the same kind (street, town, city or country) that still fits "
       "the conversation."},
      {EntityLabel::Url, "Use a different address of the same form."},
      {EntityLabel::DateOfBirth, "Use a different plausible date written in the same format."},
      {EntityLabel::PhoneNumber,
       "Use a different phone number in the same format with at least seven digits."},
      {EntityLabel::SchoolName, "Use a different plausible school name of the same type."},
      {EntityLabel::EmailSocial, "Use a different handle or address of the same form."},
  };
}

/// Parses `label = sentence` lines over the defaults. '#' starts a comment line.
inline LabelGuidance parse_guidance(std::istream& in, LabelGuidance base = default_guidance()) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("guidance line " + std::to_string(lineno) + " has no '='");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      base[parse_entity_label(key)] = value;
    } catch (const UnknownWireName& e) {
      throw std::invalid_argument("guidance line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline LabelGuidance load_guidance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open guidance file '" + path.string() + "'");
  return parse_guidance(in);
}

struct MappingPrompt {
  std::string system;
  std::string user;
  friend bool operator==(const MappingPrompt&, const MappingPrompt&) = default;
};

inline constexpr const char* kMappingSystemPrompt =
    "You anonymize tutoring conversations by replacing personal details with realistic "
    "surrogates. Every occurrence of the same original must receive the same surrogate, and "
    "the conversation must stay coherent after replacement. Reply with JSON only.";

/// Groups that need a generated surrogate, in label order then first occurrence.
inline std::vector<const EntityGroup*> mapped_groups(const std::vector<EntityGroup>& groups) {
  std::vector<const EntityGroup*> out;
  for (auto l : kAllEntityLabels) {
    if (is_obfuscated_label(l)) continue;
    for (const auto& g : groups) {
      if (g.label == l) out.push_back(&g);
    }
  }
  return out;
}

inline MappingPrompt build_mapping_prompt(const Dialogue& d, const std::vector<EntityGroup>& groups,
                                          const LabelGuidance& guidance = default_guidance()) {
  const auto requested = mapped_groups(groups);
  if (requested.empty()) {
    throw std::invalid_argument("no entity groups need a surrogate mapping");
  }
  std::ostringstream u;
  u << "Conversation transcript:\n";
  for (const auto& m : d.messages) {
    u << '[' << m.index << "] " << wire_name(m.speaker) << ": " << m.text << '\n';
  }
  u << "\nEntities to replace:\n";
  std::optional<EntityLabel> current;
  for (const auto* g : requested) {
    if (current != g->label) {
      u << wire_name(g->label) << ":\n";
      current = g->label;
    }
    u << "- " << nlohmann::json(g->display).dump() << '\n';
  }
  u << "\nGuidance:\n";
  current.reset();
  for (const auto* g : requested) {
    if (current == g->label) continue;
    current = g->label;
    auto it = guidance.find(g->label);
    if (it != guidance.end() && !it->second.empty()) {
      u << wire_name(g->label) << ": " << it->second << '\n';
    }
  }
  u << "\nReply with a JSON object of this form:\n"
       "{\"mapping\": [{\"label\": \"<label>\", \"original\": \"<original text>\", "
       "\"surrogate\": \"<replacement>\"}]}\n"
       "Include exactly one entry for every entity listed above and no others.\n";
  return {kMappingSystemPrompt, u.str()};
}

// ---------------------------------------------------------------------------
// Mapping replies

struct MappingEntry {
  EntityLabel label = EntityLabel::Name;
  std::string original;  // as written by the model; normalizes to the group canonical
  std::string surrogate;
  friend bool operator==(const MappingEntry&, const MappingEntry&) = default;
};

struct SurrogateMapping {
  std::string dialogue_id;
  std::vector<MappingEntry> entries;

  const MappingEntry* find(EntityLabel label, std::string_view canonical) const {
    for (const auto& e : entries) {
      if (e.label == label && unicode::normalize_utf8(e.original) == canonical) return &e;
    }
    return nullptr;
  }
};

enum class MappingErrorKind { Unparseable, MissingKey, ExtraKey };

class MappingParseError : public std::runtime_error {
 public:
  MappingParseError(MappingErrorKind kind, const std::string& what, std::vector<std::string> keys = {})
      : std::runtime_error(what), kind_(kind), keys_(std::move(keys)) {}
  MappingErrorKind kind() const { return kind_; }
  /// `label:canonical` of the offending keys.
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  MappingErrorKind kind_;
  std::vector<std::string> keys_;
};

namespace detail {

// End of the balanced JSON value starting at `open`, or npos.
inline std::size_t balanced_end(std::string_view s, std::size_t open) {
  const char o = s[open];
  const char c = o == '{' ? '}' : ']';
  int depth = 0;
  bool in_str = false;
  bool esc = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char ch = s[i];
    if (in_str) {
      if (esc) esc = false;
      else if (ch == '\\') esc = true;
      else if (ch == '"') in_str = false;
      continue;
    }
    if (ch == '"') in_str = true;
    else if (ch == o) ++depth;
    else if (ch == c && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

/// First JSON object or array embedded in `raw` that parses.
inline std::optional<nlohmann::json> extract_json_block(std::string_view raw) {
  if (auto whole = nlohmann::json::parse(raw, nullptr, false); !whole.is_discarded()) {
    return whole;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{' && raw[i] != '[') continue;
    const auto end = balanced_end(raw, i);
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(raw.substr(i, end - i), nullptr, false);
    if (!j.is_discarded() && (j.is_object() || j.is_array())) return j;
  }
  return std::nullopt;
}

inline std::string key_name(EntityLabel l, std::string_view canonical) {
  return std::string(wire_name(l)) + ":" + std::string(canonical);
}

inline std::string trim_ws(std::string_view s) {
  const auto cps = unicode::decode(s);
  std::size_t a = 0, b = cps.size();
  while (a < b && unicode::is_whitespace(cps[a])) ++a;
  while (b > a && unicode::is_whitespace(cps[b - 1])) --b;
  return unicode::encode(std::u32string_view(cps).substr(a, b - a));
}

}  // namespace detail

/// Extracts the mapping from a model reply. The reply may wrap the JSON in
/// prose or a code fence. Exactly the requested keys must appear.
inline SurrogateMapping parse_mapping_response(std::string_view raw,
                                               const std::vector<EntityGroup>& groups,
                                               std::string dialogue_id = {}) {
  const auto block = detail::extract_json_block(raw);
  if (!block) throw MappingParseError(MappingErrorKind::Unparseable, "reply contains no JSON mapping");
  const nlohmann::json* list = nullptr;
  if (block->is_array()) list = &*block;
  else if (auto it = block->find("mapping"); it != block->end() && it->is_array()) list = &*it;
  if (!list) {
    throw MappingParseError(MappingErrorKind::Unparseable, "reply JSON has no \"mapping\" array");
  }

  const auto requested = mapped_groups(groups);
  std::map<std::pair<EntityLabel, std::string>, MappingEntry> got;
  std::vector<std::string> extra;
  for (const auto& item : *list) {
    MappingEntry e;
    try {
      e.label = parse_entity_label(item.at("label").get<std::string>());
      e.original = item.at("original").get<std::string>();
      e.surrogate = detail::trim_ws(item.at("surrogate").get<std::string>());
    } catch (const std::exception& ex) {
      throw MappingParseError(MappingErrorKind::Unparseable,
                              std::string("mapping entry is malformed: ") + ex.what());
    }
    const auto canonical = unicode::normalize_utf8(e.original);
    const bool wanted = std::any_of(requested.begin(), requested.end(), [&](const EntityGroup* g) {
      return g->label == e.label && g->canonical == canonical;
    });
    if (!wanted || !got.emplace(std::pair{e.label, canonical}, e).second) {
      extra.push_back(detail::key_name(e.label, canonical));
    }
  }
  std::vector<std::string> missing;
  SurrogateMapping m{std::move(dialogue_id), {}};
  for (const auto* g : requested) {
    auto it = got.find({g->label, g->canonical});
    if (it == got.end()) missing.push_back(detail::key_name(g->label, g->canonical));
    else m.entries.push_back(it->second);
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& k : v) s += (s.empty() ? "" : ", ") + k;
    return s;
  };
  if (!missing.empty()) {
    throw MappingParseError(MappingErrorKind::MissingKey, "mapping is missing " + join(missing),
                            missing);
  }
  if (!extra.empty()) {
    throw MappingParseError(MappingErrorKind::ExtraKey,
                            "mapping has unrequested or duplicate entries " + join(extra), extra);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Quality checks

enum class ViolationKind { TooSimilar, Empty, ContainsOriginal, WrongLabelFormat };

constexpr std::string_view wire_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::TooSimilar: return "too_similar";
    case ViolationKind::Empty: return "empty";
    case ViolationKind::ContainsOriginal: return "contains_original";
    case ViolationKind::WrongLabelFormat: return "wrong_label_format";
  }
  return "";
}

struct QualityViolation {
  std::size_t entry = 0;  // index into SurrogateMapping::entries
  MappingEntry subject;
  ViolationKind kind = ViolationKind::Empty;
  std::string detail;
};

/// Levenshtein distance over scalar values.
inline std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// 1 - distance / max(length), computed on normalized strings. Two empty
/// strings are identical (1).
inline double similarity(std::string_view a, std::string_view b) {
  const auto na = unicode::normalize(unicode::decode(a));
  const auto nb = unicode::normalize(unicode::decode(b));
  const auto longest = std::max(na.size(), nb.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(na, nb)) / static_cast<double>(longest);
}

namespace detail {

inline bool contains_whole_word(std::u32string_view hay, std::u32string_view needle) {
  if (needle.empty()) return false;
  for (auto pos = hay.find(needle); pos != std::u32string_view::npos; pos = hay.find(needle, pos + 1)) {
    const auto end = pos + needle.size();
    const bool left = pos == 0 || !unicode::is_word_char(hay[pos - 1]);
    const bool right = end == hay.size() || !unicode::is_word_char(hay[end]);
    if (left && right) return true;
  }
  return false;
}

inline int days_in_month(int month, int year) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && year > 0 && ((year % 4 == 0 && year % 100 != 0) || year % 400 == 0)) return 29;
  return kDays[month - 1];
}

inline bool valid_dmy(int d, int m, int y) {
  return m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(m, y);
}

}  // namespace detail

/// Accepts numeric dates (d/m/y, m/d/y, y-m-d with / - . separators) and
/// written dates with a month name and day, optional ordinal suffix, "of"
/// and year ("3rd of June 2011", "June 3, 2011", "3 Jun").
inline bool parses_as_date(std::string_view text) {
  std::string s;
  for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static const std::regex kNumeric(R"(^\s*(\d{1,4})[/.\-](\d{1,2})[/.\-](\d{1,4})\s*$)");
  std::smatch m;
  if (std::regex_match(s, m, kNumeric)) {
    const int a = std::stoi(m[1]), b = std::stoi(m[2]), c = std::stoi(m[3]);
    if (m[1].length() == 4) return detail::valid_dmy(c, b, a);
    if (m[3].length() != 2 && m[3].length() != 4) return false;
    const int year = m[3].length() == 2 ? 2000 + c : c;
    return detail::valid_dmy(a, b, year) || detail::valid_dmy(b, a, year);
  }
  static const char* kMonths[] = {"january", "february", "march",     "april",   "may",      "june",
                                  "july",    "august",   "september", "october", "november", "december"};
  for (auto& ch : s) {
    if (ch == ',' || ch == '.') ch = ' ';
  }
  std::istringstream words(s);
  std::string w;
  int month = 0, day = 0, year = 0;
  while (words >> w) {
    if (w == "of" || w == "the") continue;
    bool matched = false;
    for (int i = 0; i < 12; ++i) {
      const std::string_view full = kMonths[i];
      if (w == full || (w.size() == 3 && full.substr(0, 3) == w) || (i == 8 && w == "sept")) {
        if (month) return false;
        month = i + 1;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    static const std::regex kDay(R"(^(\d{1,2})(st|nd|rd|th)?$)");
    static const std::regex kYear(R"(^(\d{4})$)");
    std::smatch dm;
    if (std::regex_match(w, dm, kYear) && !year) {
      year = std::stoi(dm[1]);
    } else if (std::regex_match(w, dm, kDay) && !day) {
      day = std::stoi(dm[1]);
    } else {
      return false;
    }
  }
  return month && day && detail::valid_dmy(day, month, year);
}

struct QualityOptions {
  double max_similarity = 0.5;
};

/// Measurable checks on each mapping entry, in entry order.
inline std::vector<QualityViolation> check_quality(const SurrogateMapping& m,
                                                   const QualityOptions& opts = {}) {
  std::vector<QualityViolation> out;
  std::vector<std::u32string> originals;
  for (const auto& e : m.entries) originals.push_back(unicode::normalize(unicode::decode(e.original)));
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    auto flag = [&](ViolationKind k, std::string detail) { out.push_back({i, e, k, std::move(detail)}); };
    const auto sur = unicode::normalize(unicode::decode(e.surrogate));
    const auto& orig = originals[i];
    if (sur.empty()) {
      flag(ViolationKind::Empty, "the replacement is blank; provide a non-empty replacement");
      continue;
    }
    if (sur.find(orig) != std::u32string::npos || orig.find(sur) != std::u32string::npos) {
      flag(ViolationKind::ContainsOriginal,
           "the replacement and the original contain one another; use unrelated text");
    } else {
      for (std::size_t k = 0; k < originals.size(); ++k) {
        if (k != i && detail::contains_whole_word(sur, originals[k])) {
          flag(ViolationKind::ContainsOriginal,
               "the replacement reuses another original entity; pick text that is not among the "
               "originals");
          break;
        }
      }
    }
    const double sim = similarity(e.original, e.surrogate);
    if (sim > opts.max_similarity) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "similarity %.2f exceeds %.2f; choose a replacement that differs clearly from "
                    "the original",
                    sim, opts.max_similarity);
      flag(ViolationKind::TooSimilar, buf);
    }
    if (e.label == EntityLabel::PhoneNumber) {
      const auto digits = std::count_if(e.surrogate.begin(), e.surrogate.end(),
                                        [](char c) { return c >= '0' && c <= '9'; });
      if (digits < 7) flag(ViolationKind::WrongLabelFormat, "a phone number needs at least 7 digits");
    } else if (e.label == EntityLabel::DateOfBirth && !parses_as_date(e.surrogate)) {
      flag(ViolationKind::WrongLabelFormat, "a date of birth must be a valid calendar date");
    }
  }
  return out;
}

inline std::string format_feedback(const std::vector<QualityViolation>& violations) {
  std::string out = "Some replacements do not meet the requirements:\n";
  for (const auto& v : violations) {
    out += "- " + v.subject.original + " → " + v.subject.surrogate + ": " +
           std::string(wire_name(v.kind)) + ": " + v.detail + "\n";
  }
  out += "Reply with the complete corrected JSON mapping.";
  return out;
}

inline std::string format_parse_feedback(const MappingParseError& e) {
  return std::string("Your reply could not be used: ") + e.what() +
         ". Reply with the complete JSON mapping covering exactly the listed entities.";
}

// ---------------------------------------------------------------------------
// Feedback loop

struct RepromptOptions {
  std::size_t max_rounds = 3;
  QualityOptions quality;
  std::string model_name = "gpt-4o-2024-11-20";
  double temperature = 0.0;
};

struct RepromptResult {
  SurrogateMapping mapping;
  std::size_t rounds_used = 0;
};

class MappingExhausted : public std::runtime_error {
 public:
  MappingExhausted(std::size_t rounds, std::vector<QualityViolation> violations, std::string last_error)
      : std::runtime_error(describe(rounds, violations, last_error)),
        rounds_(rounds),
        violations_(std::move(violations)),
        last_error_(std::move(last_error)) {}
  std::size_t rounds() const { return rounds_; }
  const std::vector<QualityViolation>& violations() const { return violations_; }
  const std::string& last_error() const { return last_error_; }

 private:
  static std::string describe(std::size_t rounds, const std::vector<QualityViolation>& v,
                              const std::string& last_error) {
    std::string s = "no acceptable mapping after " + std::to_string(rounds) + " round(s)";
    if (!last_error.empty()) s += ": " + last_error;
    if (!v.empty()) {
      s += ": violations";
      for (const auto& x : v) s += " " + std::string(wire_name(x.kind));
    }
    return s;
  }

  std::size_t rounds_;
  std::vector<QualityViolation> violations_;
  std::string last_error_;
};

/// Request -> parse -> check, feeding problems back until a clean mapping
/// arrives or `max_rounds` requests have been made.
inline RepromptResult reprompt_with_feedback(llm::ChatClient& client, const MappingPrompt& prompt,
                                             const std::vector<EntityGroup>& groups,
                                             const RepromptOptions& opts,
                                             const std::string& dialogue_id = {}) {
  if (opts.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  llm::ChatRequest req;
  req.model_name = opts.model_name;
  req.temperature = opts.temperature;
  req.messages = {{llm::Role::System, prompt.system}, {llm::Role::User, prompt.user}};
  std::vector<QualityViolation> last_violations;
  std::string last_error;
  for (std::size_t round = 1; round <= opts.max_rounds; ++round) {
    const auto reply = client.send_chat(req);
    std::string feedback;
    try {
      auto mapping = parse_mapping_response(reply, groups, dialogue_id);
      last_violations = check_quality(mapping, opts.quality);
      last_error.clear();
      if (last_violations.empty()) return {std::move(mapping), round};
      feedback = format_feedback(last_violations);
    } catch (const MappingParseError& e) {
      last_violations.clear();
      last_error = e.what();
      feedback = format_parse_feedback(e);
    }
    req.messages.push_back({llm::Role::Assistant, reply});
    req.messages.push_back({llm::Role::User, feedback});
  }
  throw MappingExhausted(opts.max_rounds, std::move(last_violations), std::move(last_error));
}

// ---------------------------------------------------------------------------
// Replacement

struct SkippedSpan {
  Span span;
  std::string reason;
};

struct AnonymizationReport {
  std::string dialogue_id;
  std::map<EntityLabel, std::size_t> replacements;
  std::size_t reprompt_rounds = 0;
  std::size_t obfuscated = 0;
  std::vector<SkippedSpan> skipped;
};

inline nlohmann::ordered_json to_json(const AnonymizationReport& r) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = r.dialogue_id;
  auto& rep = j["replacements"] = nlohmann::ordered_json::object();
  for (auto l : kAllEntityLabels) {
    if (auto it = r.replacements.find(l); it != r.replacements.end()) rep[std::string(wire_name(l))] = it->second;
  }
  j["reprompt_rounds"] = r.reprompt_rounds;
  j["obfuscated"] = r.obfuscated;
  auto& sk = j["skipped"] = nlohmann::ordered_json::array();
  for (const auto& s : r.skipped) {
    auto e = span_to_json(s.span);
    e["reason"] = s.reason;
    sk.push_back(std::move(e));
  }
  return j;
}

struct AnonymizationResult {
  Dialogue dialogue;  // spans relocated onto the inserted surrogates
  AnonymizationReport report;
};

inline constexpr std::string_view kSuperstringRisk = "risk:superstring_of_group";

/// Substitutes every span. Replacement runs right to left inside each
/// message so earlier offsets stay valid; all occurrences of a group get
/// the same surrogate.
inline AnonymizationResult apply_mapping(const Dialogue& d, std::vector<Span> spans,
                                         const SurrogateMapping& m, std::size_t rounds = 0) {
  try {
    require_non_overlapping(spans);
  } catch (const CorpusError& e) {
    throw AnonymizeError(e.what());
  }
  AnonymizationResult res{d, {d.id, {}, rounds, 0, {}}};
  std::sort(spans.begin(), spans.end(), span_position_less);

  std::vector<std::string> surrogates(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    validate_span_range(d, s);
    if (is_obfuscated_label(s.label)) {
      surrogates[i] = obfuscate_verifiable(s);
      ++res.report.obfuscated;
    } else {
      const auto* e = m.find(s.label, unicode::normalize_utf8(span_surface(d, s)));
      if (!e) {
        throw AnonymizeError("no mapping entry for " + std::string(wire_name(s.label)) +
                             " span at message " + std::to_string(s.message_index) + " [" +
                             std::to_string(s.start) + "," + std::to_string(s.end) + ")");
      }
      surrogates[i] = e->surrogate;
    }
    ++res.report.replacements[s.label];
  }

  std::vector<Span> relocated;
  for (std::size_t lo = 0; lo < spans.size();) {
    std::size_t hi = lo;
    const auto mi = spans[lo].message_index;
    while (hi < spans.size() && spans[hi].message_index == mi) ++hi;
    auto text = unicode::decode(d.messages[mi].text);
    for (std::size_t k = hi; k-- > lo;) {
      text.replace(spans[k].start, spans[k].length(), unicode::decode(surrogates[k]));
    }
    res.dialogue.messages[mi].text = unicode::encode(text);
    long long shift = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      Span s = spans[k];
      const auto len = unicode::length(surrogates[k]);
      s.start = static_cast<std::size_t>(static_cast<long long>(s.start) + shift);
      shift += static_cast<long long>(len) - static_cast<long long>(spans[k].length());
      s.end = s.start + len;
      if (len > 0) relocated.push_back(s);
    }
    lo = hi;
  }
  res.dialogue.spans = std::move(relocated);

  // Groups whose canonical contains another group's canonical as a whole word
  // ("john's" vs "john") are replaced independently; flag them for review.
  const auto groups = group_entities(d, spans);
  for (const auto& g : groups) {
    const auto gc = unicode::decode(g.canonical);
    const bool risky = std::any_of(groups.begin(), groups.end(), [&](const EntityGroup& o) {
      return &o != &g && o.label == g.label && o.canonical.size() < g.canonical.size() &&
             detail::contains_whole_word(gc, unicode::decode(o.canonical));
    });
    if (!risky) continue;
    for (const auto& s : g.occurrences) res.report.skipped.push_back({s, std::string(kSuperstringRisk)});
  }

  validate(res.dialogue);
  return res;
}

/// Full anonymization of one dialogue: group, prompt, reprompt, apply.
/// Obfuscated labels never reach the model; with nothing else to map no
/// request is made.
inline AnonymizationResult anonymize_dialogue(const Dialogue& d, const std::vector<Span>& spans,
                                              llm::ChatClient& client, const RepromptOptions& opts,
                                              const LabelGuidance& guidance = default_guidance()) {
  std::vector<Span> usable;
  for (const auto& s : spans) {
    if (s.message_index < d.messages.size() && !d.messages[s.message_index].degenerate()) usable.push_back(s);
  }
  const auto groups = group_entities(d, usable);
  SurrogateMapping mapping{d.id, {}};
  std::size_t rounds = 0;
  if (!mapped_groups(groups).empty()) {
    auto r = reprompt_with_feedback(client, build_mapping_prompt(d, groups, guidance), groups, opts, d.id);
    mapping = std::move(r.mapping);
    rounds = r.rounds_used;
  }
  return apply_mapping(d, usable, mapping, rounds);
}

}  // namespace anonpivot
