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
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/labels.hpp"
#include "anonpivot/unicode.hpp"

namespace anonpivot {

struct Message {
  std::size_t index = 0;
  SpeakerRole speaker = SpeakerRole::Student;
  std::string text;  // UTF-8

  /// Empty messages are accepted but never anonymized.
  bool degenerate() const { return text.empty(); }

  friend bool operator==(const Message&, const Message&) = default;
};

/// Labeled region of one message. Offsets count Unicode scalar values,
/// `end` is exclusive.
struct Span {
  std::size_t message_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  EntityLabel label = EntityLabel::Name;
  SpanSource source = SpanSource::Model;

  std::size_t length() const { return end - start; }
  bool overlaps(const Span& o) const {
    return message_index == o.message_index && start < o.end && o.start < end;
  }

  friend bool operator==(const Span&, const Span&) = default;
};

/// Orders spans by position; label and source break ties so the order is total.
inline bool span_position_less(const Span& a, const Span& b) {
  return std::tie(a.message_index, a.start, a.end, a.label, a.source) <
         std::tie(b.message_index, b.start, b.end, b.label, b.source);
}

struct Dialogue {
  std::string id;
  std::vector<Message> messages;
  std::optional<std::string> question_id;
  std::optional<std::vector<TalkMoveLabel>> talk_moves;
  std::optional<std::vector<Span>> spans;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// One or more consecutive messages from the same speaker.
struct Turn {
  SpeakerRole speaker = SpeakerRole::Student;
  std::vector<std::size_t> message_indices;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  /// 1-based line of the offending record, 0 when not tied to a file line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class CorpusIoError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

/// Checks that `span` indexes scalar-value boundaries of its message.
inline void validate_span_range(const Dialogue& d, const Span& s) {
  if (s.message_index >= d.messages.size()) {
    throw CorpusError("span message_index " + std::to_string(s.message_index) +
                      " outside dialogue '" + d.id + "'");
  }
  const auto len = unicode::length(d.messages[s.message_index].text);
  if (!(s.start < s.end && s.end <= len)) {
    throw CorpusError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                      ") invalid for message " + std::to_string(s.message_index) +
                      " of length " + std::to_string(len));
  }
}

/// Throws CorpusError if any span overlaps another span of the same message.
inline void require_non_overlapping(std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end(), span_position_less);
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].overlaps(spans[i])) {
      throw CorpusError("overlapping spans in message " +
                        std::to_string(spans[i].message_index) + " at offsets " +
                        std::to_string(spans[i - 1].start) + " and " +
                        std::to_string(spans[i].start));
    }
  }
}

/// Validates every Dialogue invariant. Messages must already be ordered by index.
inline void validate(const Dialogue& d) {
  if (d.id.empty()) throw CorpusError("dialogue id is empty");
  if (d.messages.empty()) throw CorpusError("dialogue '" + d.id + "' has no messages");
  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    if (d.messages[i].index != i) {
      throw CorpusError("dialogue '" + d.id + "': message indices not contiguous, expected " +
                        std::to_string(i) + " but found " +
                        std::to_string(d.messages[i].index));
    }
  }
  if (d.talk_moves && d.talk_moves->size() != d.messages.size()) {
    throw CorpusError("dialogue '" + d.id + "': talk_moves has " +
                      std::to_string(d.talk_moves->size()) + " entries for " +
                      std::to_string(d.messages.size()) + " messages");
  }
  if (d.spans) {
    for (const auto& s : *d.spans) validate_span_range(d, s);
    require_non_overlapping(*d.spans);
  }
}

namespace detail {

using ordered_json = nlohmann::ordered_json;

template <typename T>
T require_field(const nlohmann::json& obj, const char* name, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end()) throw CorpusError("missing field '" + where + name + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CorpusError("field '" + where + name + "' has the wrong type");
  }
}

}  // namespace detail

inline nlohmann::ordered_json span_to_json(const Span& s) {
  return {{"message_index", s.message_index},
          {"start", s.start},
          {"end", s.end},
          {"label", wire_name(s.label)},
          {"source", wire_name(s.source)}};
}

inline Span span_from_json(const nlohmann::json& j, const std::string& where = "spans[].") {
  if (!j.is_object()) throw CorpusError("span record is not an object");
  Span s;
  s.message_index = detail::require_field<std::size_t>(j, "message_index", where);
  s.start = detail::require_field<std::size_t>(j, "start", where);
  s.end = detail::require_field<std::size_t>(j, "end", where);
  try {
    s.label = parse_entity_label(detail::require_field<std::string>(j, "label", where));
    s.source = j.contains("source")
                   ? parse_span_source(detail::require_field<std::string>(j, "source", where))
                   : SpanSource::Manual;
  } catch (const UnknownWireName& e) {
    throw CorpusError(e.what());
  }
  return s;
}

inline nlohmann::ordered_json to_json(const Dialogue& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["question_id"] = d.question_id ? nlohmann::ordered_json(*d.question_id) : nlohmann::ordered_json(nullptr);
  auto& msgs = j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : d.messages) {
    msgs.push_back({{"index", m.index}, {"speaker", wire_name(m.speaker)}, {"text", m.text}});
  }
  if (d.talk_moves) {
    auto& tm = j["talk_moves"] = nlohmann::ordered_json::array();
    for (auto t : *d.talk_moves) tm.push_back(wire_name(t));
  }
  if (d.spans) {
    auto& sp = j["spans"] = nlohmann::ordered_json::array();
    for (const auto& s : *d.spans) sp.push_back(span_to_json(s));
  }
  return j;
}

/// Parses and validates one dialogue record. Messages are reordered by index.
inline Dialogue dialogue_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw CorpusError("record is not a JSON object");
  Dialogue d;
  d.id = detail::require_field<std::string>(j, "id", "");
  if (auto it = j.find("question_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw CorpusError("field 'question_id' has the wrong type");
    d.question_id = it->get<std::string>();
  }
  auto msgs = j.find("messages");
  if (msgs == j.end() || !msgs->is_array()) {
    throw CorpusError("missing or non-array field 'messages'");
  }
  std::set<std::size_t> seen;
  for (const auto& mj : *msgs) {
    if (!mj.is_object()) throw CorpusError("message record is not an object");
    Message m;
    m.index = detail::require_field<std::size_t>(mj, "index", "messages[].");
    try {
      m.speaker = parse_speaker(detail::require_field<std::string>(mj, "speaker", "messages[]."));
    } catch (const UnknownWireName& e) {
      throw CorpusError(e.what());
    }
    m.text = detail::require_field<std::string>(mj, "text", "messages[].");
    if (!seen.insert(m.index).second) {
      throw CorpusError("duplicate message index " + std::to_string(m.index));
    }
    d.messages.push_back(std::move(m));
  }
  std::sort(d.messages.begin(), d.messages.end(),
            [](const Message& a, const Message& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    if (d.messages[i].index != i) {
      throw CorpusError("message indices have a gap: index " + std::to_string(i) +
                        " is missing (next present index is " +
                        std::to_string(d.messages[i].index) + ")");
    }
  }
  if (auto it = j.find("talk_moves"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw CorpusError("field 'talk_moves' is not an array");
    std::vector<TalkMoveLabel> moves;
    for (const auto& t : *it) {
      if (!t.is_string()) throw CorpusError("talk_moves entry is not a string");
      try {
        moves.push_back(parse_talk_move(t.get<std::string>()));
      } catch (const UnknownWireName& e) {
        throw CorpusError(e.what());
      }
    }
    d.talk_moves = std::move(moves);
  }
  if (auto it = j.find("spans"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw CorpusError("field 'spans' is not an array");
    std::vector<Span> spans;
    for (const auto& s : *it) spans.push_back(span_from_json(s));
    d.spans = std::move(spans);
  }
  try {
    validate(d);
  } catch (const unicode::Utf8Error& e) {
    throw CorpusError(e.what());
  }
  return d;
}

/// Reads line-delimited dialogue records. Blank lines are ignored.
inline std::vector<Dialogue> read_corpus(std::istream& in) {
  std::vector<Dialogue> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(dialogue_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(std::string("malformed record: ") + e.what(), lineno);
    } catch (const CorpusError& e) {
      throw CorpusError(e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<Dialogue> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusIoError("cannot open corpus '" + path.string() + "'");
  return read_corpus(in);
}

inline void write_corpus(const std::vector<Dialogue>& dialogues, std::ostream& out) {
  for (const auto& d : dialogues) {
    validate(d);
    out << to_json(d).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
  }
}

inline void save_corpus(const std::vector<Dialogue>& dialogues,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusIoError("cannot write corpus '" + path.string() + "'");
  write_corpus(dialogues, out);
  out.flush();
  if (!out) throw CorpusIoError("write failed for '" + path.string() + "'");
}

/// Merges consecutive same-speaker messages; texts are joined by one space.
inline std::vector<Turn> merge_turns(const Dialogue& d) {
  std::vector<Turn> turns;
  for (const auto& m : d.messages) {
    if (turns.empty() || turns.back().speaker != m.speaker) {
      turns.push_back(Turn{m.speaker, {m.index}, m.text});
    } else {
      auto& t = turns.back();
      t.message_indices.push_back(m.index);
      t.text += ' ';
      t.text += m.text;
    }
  }
  return turns;
}

}  // namespace anonpivot
