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

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace anonpivot {

enum class SpeakerRole { Student, Tutor };

/// Potential-PII label inventory. Declaration order is the canonical order
/// used for prompts, reports, and tables.
enum class EntityLabel {
  Name,
  LocationAddress,
  Url,
  DateOfBirth,
  PhoneNumber,
  SchoolName,
  EmailSocial,
};

inline constexpr std::array<EntityLabel, 7> kAllEntityLabels{
    EntityLabel::Name,        EntityLabel::LocationAddress, EntityLabel::Url,
    EntityLabel::DateOfBirth, EntityLabel::PhoneNumber,     EntityLabel::SchoolName,
    EntityLabel::EmailSocial,
};

enum class SpanSource { Rule, Model, Manual };

enum class TalkMoveLabel {
  PressForAccuracy,
  KeepTogether,
  Revoicing,
  Restating,
  PressForReasoning,
  GettingStudentsToRelate,
  None,
};

inline constexpr std::array<TalkMoveLabel, 7> kAllTalkMoves{
    TalkMoveLabel::PressForAccuracy,  TalkMoveLabel::KeepTogether,
    TalkMoveLabel::Revoicing,         TalkMoveLabel::Restating,
    TalkMoveLabel::PressForReasoning, TalkMoveLabel::GettingStudentsToRelate,
    TalkMoveLabel::None,
};

class UnknownWireName : public std::invalid_argument {
 public:
  UnknownWireName(std::string_view kind, std::string_view name)
      : std::invalid_argument("unknown " + std::string(kind) + " '" + std::string(name) + "'") {}
};

constexpr std::string_view wire_name(SpeakerRole r) {
  return r == SpeakerRole::Student ? "student" : "tutor";
}

constexpr std::string_view wire_name(EntityLabel l) {
  switch (l) {
    case EntityLabel::Name: return "name";
    case EntityLabel::LocationAddress: return "location_address";
    case EntityLabel::Url: return "url";
    case EntityLabel::DateOfBirth: return "date_of_birth";
    case EntityLabel::PhoneNumber: return "phone_number";
    case EntityLabel::SchoolName: return "school_name";
    case EntityLabel::EmailSocial: return "email_social";
  }
  return "";
}

constexpr std::string_view wire_name(SpanSource s) {
  switch (s) {
    case SpanSource::Rule: return "rule";
    case SpanSource::Model: return "model";
    case SpanSource::Manual: return "manual";
  }
  return "";
}

constexpr std::string_view wire_name(TalkMoveLabel t) {
  switch (t) {
    case TalkMoveLabel::PressForAccuracy: return "press_accuracy";
    case TalkMoveLabel::KeepTogether: return "keep_together";
    case TalkMoveLabel::Revoicing: return "revoicing";
    case TalkMoveLabel::Restating: return "restating";
    case TalkMoveLabel::PressForReasoning: return "press_reasoning";
    case TalkMoveLabel::GettingStudentsToRelate: return "gsr";
    case TalkMoveLabel::None: return "none";
  }
  return "";
}

inline std::optional<EntityLabel> try_entity_label(std::string_view name) {
  for (auto l : kAllEntityLabels) {
    if (wire_name(l) == name) return l;
  }
  return std::nullopt;
}

inline EntityLabel parse_entity_label(std::string_view name) {
  if (auto l = try_entity_label(name)) return *l;
  throw UnknownWireName("entity label", name);
}

inline SpeakerRole parse_speaker(std::string_view name) {
  if (name == "student") return SpeakerRole::Student;
  if (name == "tutor") return SpeakerRole::Tutor;
  throw UnknownWireName("speaker", name);
}

inline SpanSource parse_span_source(std::string_view name) {
  for (auto s : {SpanSource::Rule, SpanSource::Model, SpanSource::Manual}) {
    if (wire_name(s) == name) return s;
  }
  throw UnknownWireName("span source", name);
}

inline TalkMoveLabel parse_talk_move(std::string_view name) {
  for (auto t : kAllTalkMoves) {
    if (wire_name(t) == name) return t;
  }
  throw UnknownWireName("talk move", name);
}

}  // namespace anonpivot
