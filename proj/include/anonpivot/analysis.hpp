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
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "anonpivot/corpus.hpp"
#include "anonpivot/labels.hpp"
#include "anonpivot/unicode.hpp"
#include "anonpivot/words.hpp"

namespace anonpivot {

/// Target message with up to `size` neighbors on each side. `before` is in
/// dialogue order, so its last element is the immediate predecessor.
struct ContextWindow {
  std::vector<Message> before;
  Message target;
  std::vector<Message> after;

  const Message* previous() const { return before.empty() ? nullptr : &before.back(); }
  const Message* next() const { return after.empty() ? nullptr : &after.front(); }
};

/// IO tag: absent means O, otherwise I-<label>.
using IoTag = std::optional<EntityLabel>;

inline std::string tag_to_string(const IoTag& t) {
  return t ? "I-" + std::string(wire_name(*t)) : std::string("O");
}

inline IoTag parse_io_tag(std::string_view s) {
  if (s == "O") return std::nullopt;
  if (s.size() > 2 && s.substr(0, 2) == "I-") {
    if (auto l = try_entity_label(s.substr(2))) return *l;
  }
  throw UnknownWireName("IO tag", s);
}

/// One recognizer token over the target message, offsets in scalar values.
struct TokenLabel {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  IoTag tag;
};

class TokenRangeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by analyze_dialogue when the recognizer fails on one message.
class RecognizerError : public std::runtime_error {
 public:
  RecognizerError(std::size_t message_index, const std::string& what)
      : std::runtime_error("message " + std::to_string(message_index) + ": " + what),
        message_index_(message_index) {}
  std::size_t message_index() const { return message_index_; }

 private:
  std::size_t message_index_;
};

/// Anything that tags the target message of a context window.
///
/// Implementations are shared between workers. One that cannot take
/// simultaneous calls returns false from concurrent(); the pipeline then
/// routes it through a single lane (see SerialRecognizer).
class Recognizer {
 public:
  virtual ~Recognizer() = default;
  virtual std::vector<TokenLabel> recognize(const ContextWindow& window) const = 0;
  virtual SpanSource source() const { return SpanSource::Model; }
  virtual bool concurrent() const { return true; }
};

class SerialRecognizer final : public Recognizer {
 public:
  explicit SerialRecognizer(const Recognizer& inner) : inner_(inner) {}
  std::vector<TokenLabel> recognize(const ContextWindow& window) const override {
    std::lock_guard lock(mu_);
    return inner_.recognize(window);
  }
  SpanSource source() const override { return inner_.source(); }
  bool concurrent() const override { return true; }

 private:
  const Recognizer& inner_;
  mutable std::mutex mu_;
};

/// Recognizer backed by a callable; mostly for tests and adapters.
class FunctionRecognizer final : public Recognizer {
 public:
  using Fn = std::function<std::vector<TokenLabel>(const ContextWindow&)>;
  explicit FunctionRecognizer(Fn fn, SpanSource source = SpanSource::Model)
      : fn_(std::move(fn)), source_(source) {}
  std::vector<TokenLabel> recognize(const ContextWindow& w) const override { return fn_(w); }
  SpanSource source() const override { return source_; }

 private:
  Fn fn_;
  SpanSource source_;
};

inline ContextWindow build_context_window(const Dialogue& d, std::size_t i,
                                          std::size_t size = 1) {
  if (i >= d.messages.size()) {
    throw std::out_of_range("message index " + std::to_string(i) + " outside dialogue of " +
                            std::to_string(d.messages.size()) + " messages");
  }
  ContextWindow w;
  w.target = d.messages[i];
  const std::size_t lo = i >= size ? i - size : 0;
  for (std::size_t k = lo; k < i; ++k) w.before.push_back(d.messages[k]);
  for (std::size_t k = i + 1; k < d.messages.size() && k <= i + size; ++k) {
    w.after.push_back(d.messages[k]);
  }
  return w;
}

/// Checks ordering, non-overlap, and bounds of a token list for a target of
/// `text_length` scalar values.
inline void validate_tokens(std::size_t text_length, const std::vector<TokenLabel>& tokens) {
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.start > t.end || t.end > text_length) {
      throw TokenRangeError("token " + std::to_string(i) + " range [" +
                            std::to_string(t.start) + "," + std::to_string(t.end) +
                            ") exceeds message of length " + std::to_string(text_length));
    }
    if (t.start < prev_end) {
      throw TokenRangeError("token " + std::to_string(i) +
                            " overlaps or precedes the previous token");
    }
    prev_end = std::max(prev_end, t.end);
  }
}

/// Word-level spans from token tags: each word takes the tag of the first
/// token intersecting it, then runs of words with the same label merge.
inline std::vector<Span> aggregate_to_word_spans(const Message& msg,
                                                 const std::vector<TokenLabel>& tokens,
                                                 SpanSource source = SpanSource::Model) {
  const auto text = unicode::decode(msg.text);
  validate_tokens(text.size(), tokens);
  std::vector<Span> spans;
  std::size_t cursor = 0;
  std::optional<Span> open;
  for (const auto& w : split_words(text)) {
    while (cursor < tokens.size() &&
           (tokens[cursor].end <= w.start || tokens[cursor].start == tokens[cursor].end)) {
      ++cursor;
    }
    IoTag tag;
    if (cursor < tokens.size() && tokens[cursor].start < w.end) tag = tokens[cursor].tag;
    if (open && tag && open->label == *tag) {
      open->end = w.end;
      continue;
    }
    if (open) spans.push_back(*open);
    open.reset();
    if (tag) open = Span{msg.index, w.start, w.end, *tag, source};
  }
  if (open) spans.push_back(*open);
  return spans;
}

/// Strips punctuation and whitespace from both ends of a span. Characters
/// inside the span are untouched.
inline std::optional<Span> trim_span_punctuation(const Span& span, std::u32string_view text) {
  auto strip = [](char32_t c) { return unicode::is_punctuation(c) || unicode::is_whitespace(c); };
  std::size_t s = span.start;
  std::size_t e = std::min(span.end, text.size());
  while (s < e && strip(text[s])) ++s;
  while (e > s && strip(text[e - 1])) --e;
  if (s == e) return std::nullopt;
  Span out = span;
  out.start = s;
  out.end = e;
  return out;
}

inline std::optional<Span> trim_span_punctuation(const Span& span, std::string_view utf8) {
  return trim_span_punctuation(span, unicode::decode(utf8));
}

/// Runs window -> recognize -> aggregate -> trim over every message.
inline std::vector<Span> analyze_dialogue(const Dialogue& d, const Recognizer& r,
                                          std::size_t window_size = 1) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < d.messages.size(); ++i) {
    const auto& msg = d.messages[i];
    if (msg.degenerate()) continue;
    std::vector<Span> spans;
    try {
      const auto tokens = r.recognize(build_context_window(d, i, window_size));
      spans = aggregate_to_word_spans(msg, tokens, r.source());
    } catch (const std::exception& e) {
      throw RecognizerError(i, e.what());
    }
    const auto text = unicode::decode(msg.text);
    for (const auto& s : spans) {
      if (auto t = trim_span_punctuation(s, std::u32string_view(text))) out.push_back(*t);
    }
  }
  return out;
}

}  // namespace anonpivot
