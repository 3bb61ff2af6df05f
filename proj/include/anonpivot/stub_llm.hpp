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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/anonymize.hpp"
#include "anonpivot/labels.hpp"
#include "anonpivot/llm_client.hpp"
#include "anonpivot/unicode.hpp"

/// Offline stand-ins for the mapping model, used by tests and by the CLI's
/// `synthetic` and `identity` LLM modes.
namespace anonpivot::stub {

struct RequestedEntity {
  EntityLabel label;
  std::string original;
};

/// Reads the "Entities to replace" block of a mapping prompt.
inline std::vector<RequestedEntity> requested_entities(std::string_view user_prompt) {
  std::vector<RequestedEntity> out;
  const auto start = user_prompt.find("Entities to replace:\n");
  if (start == std::string_view::npos) return out;
  std::size_t pos = start + std::string_view("Entities to replace:\n").size();
  std::optional<EntityLabel> label;
  while (pos < user_prompt.size()) {
    auto eol = user_prompt.find('\n', pos);
    if (eol == std::string_view::npos) eol = user_prompt.size();
    const auto line = user_prompt.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) break;
    if (line.size() > 2 && line.substr(0, 2) == "- " && label) {
      out.push_back({*label, nlohmann::json::parse(line.substr(2)).get<std::string>()});
    } else if (line.back() == ':') {
      label = try_entity_label(line.substr(0, line.size() - 1));
    }
  }
  return out;
}

inline const std::vector<std::string>& surrogate_pool(EntityLabel l) {
  static const std::vector<std::string> kNames{
      "Priya", "Tomasz", "Amara", "Kenji", "Lucia", "Oluwaseun", "Freya", "Dmitri", "Anaya",
      "Callum", "Ines", "Mateo", "Zainab", "Rhys", "Yusuf", "Elspeth", "Bogdan", "Niamh",
      "Hiroshi", "Farida", "Cormac", "Svetlana", "Idris", "Marisol"};
  static const std::vector<std::string> kPlaces{
      "Pendlebury", "Wexcombe", "Alderbrook", "Thornaby Vale", "Kestrel Row", "Marlowe Green",
      "Hollinsford", "Quarrington", "Bramhill", "Ashcott"};
  static const std::vector<std::string> kSchools{
      "Fernleigh Academy", "Oakhurst Primary", "St. Aldric's School", "Westmere High",
      "Brackenfield College", "Larchmont Junior School"};
  static const std::vector<std::string> kDates{
      "14 March 2011", "3rd of June 2010", "22/09/2012", "7 November 2009", "30 April 2013",
      "1st February 2011"};
  static const std::vector<std::string> kPhones{
      "07700 900461", "07700 900872", "020 7946 0958", "0161 496 0733", "07700 900219",
      "0113 496 0504"};
  static const std::vector<std::string> kHandles{"@placeholder_user", "example.user@example.org"};
  switch (l) {
    case EntityLabel::Name: return kNames;
    case EntityLabel::LocationAddress: return kPlaces;
    case EntityLabel::SchoolName: return kSchools;
    case EntityLabel::DateOfBirth: return kDates;
    case EntityLabel::PhoneNumber: return kPhones;
    default: return kHandles;
  }
}

/// k-th surrogate candidate for a label. Past the end of the pool, dates
/// and phone numbers are generated so they still pass the format checks;
/// other labels get a numeric suffix.
inline std::string pool_candidate(EntityLabel l, std::size_t k) {
  const auto& pool = surrogate_pool(l);
  if (k < pool.size()) return pool[k];
  const std::size_t n = k - pool.size();
  if (l == EntityLabel::DateOfBirth) {
    static const char* kMonths[] = {"January", "February", "March", "April", "May", "June",
                                    "July", "August", "September", "October", "November", "December"};
    return std::to_string(n % 28 + 1) + " " + kMonths[(n / 28) % 12] + " " +
           std::to_string(2005 + (n / 336) % 15);
  }
  if (l == EntityLabel::PhoneNumber) {
    const auto digits = std::to_string(100000 + n % 900000);
    return "07700 " + digits;
  }
  return pool[k % pool.size()] + " " + std::to_string(k / pool.size() + 1);
}

/// Deterministic compliant mapping: walks the label's pool and takes the
/// first candidate that passes check_quality against all requested originals
/// and is not already used. Pools are extended by pool_candidate once
/// exhausted.
inline std::string synthetic_reply(std::string_view user_prompt, QualityOptions q = {}) {
  const auto wanted = requested_entities(user_prompt);
  SurrogateMapping accepted;
  std::vector<MappingEntry> originals;
  for (const auto& w : wanted) originals.push_back({w.label, w.original, ""});
  nlohmann::ordered_json mapping = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    for (std::size_t k = 0; k < 100000; ++k) {
      const std::string candidate = pool_candidate(wanted[i].label, k);
      bool used = false;
      for (const auto& e : accepted.entries) used |= unicode::normalize_utf8(e.surrogate) == unicode::normalize_utf8(candidate);
      if (used) continue;
      SurrogateMapping trial{{}, originals};
      trial.entries[i].surrogate = candidate;
      bool ok = true;
      for (const auto& v : check_quality(trial, q)) ok &= v.entry != i;
      if (!ok) continue;
      originals[i].surrogate = candidate;
      accepted.entries.push_back(originals[i]);
      break;
    }
    mapping.push_back({{"label", wire_name(wanted[i].label)},
                       {"original", wanted[i].original},
                       {"surrogate", originals[i].surrogate}});
  }
  return "Here is the mapping.\n```json\n" + nlohmann::ordered_json{{"mapping", mapping}}.dump(2) +
         "\n```";
}

/// Echoes every original as its own surrogate; never passes quality checks.
inline std::string identity_reply(std::string_view user_prompt) {
  nlohmann::ordered_json mapping = nlohmann::ordered_json::array();
  for (const auto& w : requested_entities(user_prompt)) {
    mapping.push_back({{"label", wire_name(w.label)}, {"original", w.original}, {"surrogate", w.original}});
  }
  return nlohmann::ordered_json{{"mapping", mapping}}.dump();
}

/// Prompt of the first user turn; feedback rounds append later turns.
inline std::string_view first_user_message(const llm::ChatRequest& req) {
  for (const auto& m : req.messages) {
    if (m.role == llm::Role::User) return m.content;
  }
  return {};
}

inline llm::ScriptedChatClient::Responder synthetic_responder(QualityOptions q = {}) {
  return [q](const llm::ChatRequest& req) { return synthetic_reply(first_user_message(req), q); };
}

inline llm::ScriptedChatClient::Responder identity_responder() {
  return [](const llm::ChatRequest& req) { return identity_reply(first_user_message(req)); };
}

}  // namespace anonpivot::stub
