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

#include <random>

#include <gtest/gtest.h>

#include "anonpivot/analysis.hpp"
#include "test_helpers.hpp"

namespace anonpivot {
namespace {

using testing::S;
using testing::T;

TokenLabel tok(std::string text, std::size_t s, std::size_t e, IoTag tag = std::nullopt) {
  return {std::move(text), s, e, tag};
}

TEST(ContextWindow, InteriorAndBoundaries) {
  const auto d = testing::dialogue("d", {{S, "m0"}, {T, "m1"}, {S, "m2"}});
  auto w = build_context_window(d, 1);
  ASSERT_NE(w.previous(), nullptr);
  ASSERT_NE(w.next(), nullptr);
  EXPECT_EQ(w.previous()->text, "m0");
  EXPECT_EQ(w.target.text, "m1");
  EXPECT_EQ(w.next()->text, "m2");

  w = build_context_window(d, 0);
  EXPECT_EQ(w.previous(), nullptr);
  EXPECT_EQ(w.next()->text, "m1");

  const auto one = testing::dialogue("d", {{S, "only"}});
  w = build_context_window(one, 0);
  EXPECT_EQ(w.previous(), nullptr);
  EXPECT_EQ(w.next(), nullptr);
  EXPECT_THROW(build_context_window(one, 1), std::out_of_range);
}

TEST(ContextWindow, WiderWindowClipsAtEdges) {
  const auto d = testing::dialogue("d", {{S, "0"}, {T, "1"}, {S, "2"}, {T, "3"}, {S, "4"}});
  const auto w = build_context_window(d, 1, 2);
  EXPECT_EQ(w.before.size(), 1u);
  EXPECT_EQ(w.after.size(), 2u);
  EXPECT_EQ(w.after.back().text, "3");
}

TEST(IoTag, WireForm) {
  EXPECT_EQ(tag_to_string(std::nullopt), "O");
  EXPECT_EQ(tag_to_string(EntityLabel::Name), "I-name");
  EXPECT_EQ(parse_io_tag("I-phone_number"), EntityLabel::PhoneNumber);
  EXPECT_EQ(parse_io_tag("O"), std::nullopt);
  EXPECT_THROW(parse_io_tag("B-name"), UnknownWireName);
}

TEST(Aggregate, SubwordTokensMergeIntoWord) {
  const Message m{0, T, "Hi John"};
  const auto spans = aggregate_to_word_spans(
      m, {tok("Hi", 0, 2), tok("Jo", 3, 5, EntityLabel::Name), tok("hn", 5, 7, EntityLabel::Name)});
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, 3u);
  EXPECT_EQ(spans[0].end, 7u);
  EXPECT_EQ(spans[0].label, EntityLabel::Name);
}

TEST(Aggregate, AdjacentSameLabelWordsMerge) {
  const Message m{0, T, "John Smith"};
  const auto spans = aggregate_to_word_spans(
      m, {tok("John", 0, 4, EntityLabel::Name), tok("Smith", 5, 10, EntityLabel::Name)});
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, 0u);
  EXPECT_EQ(spans[0].end, 10u);
}

TEST(Aggregate, AllOutsideGivesNothing) {
  const Message m{0, T, "nothing to see"};
  EXPECT_TRUE(aggregate_to_word_spans(m, {tok("nothing", 0, 7), tok("to", 8, 10), tok("see", 11, 14)}).empty());
  EXPECT_TRUE(aggregate_to_word_spans(m, {}).empty());
}

TEST(Aggregate, FirstTokenDecidesWord) {
  const Message m{0, T, "JohnSmith ok"};
  // second subword tagged, first not: word is O
  EXPECT_TRUE(aggregate_to_word_spans(m, {tok("John", 0, 4), tok("Smith", 4, 9, EntityLabel::Name)}).empty());
  const auto spans =
      aggregate_to_word_spans(m, {tok("John", 0, 4, EntityLabel::Name), tok("Smith", 4, 9, EntityLabel::Url)});
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].label, EntityLabel::Name);
  EXPECT_EQ(spans[0].end, 9u);
}

TEST(Aggregate, DifferentLabelsStaySeparate) {
  const Message m{0, T, "John Leeds"};
  const auto spans = aggregate_to_word_spans(
      m, {tok("John", 0, 4, EntityLabel::Name), tok("Leeds", 5, 10, EntityLabel::LocationAddress)});
  ASSERT_EQ(spans.size(), 2u);
}

TEST(Aggregate, RejectsBadTokenRanges) {
  const Message m{0, T, "abc"};
  EXPECT_THROW(aggregate_to_word_spans(m, {tok("abcd", 0, 4)}), TokenRangeError);
  EXPECT_THROW(aggregate_to_word_spans(m, {tok("b", 2, 1)}), TokenRangeError);
  EXPECT_THROW(aggregate_to_word_spans(m, {tok("ab", 0, 2), tok("b", 1, 2)}), TokenRangeError);
}

TEST(Trim, StripsEdgesOnly) {
  const std::string text = "(John),";
  auto t = trim_span_punctuation(Span{0, 0, 7, EntityLabel::Name, SpanSource::Model}, text);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->start, 1u);
  EXPECT_EQ(t->end, 5u);

  t = trim_span_punctuation(Span{0, 0, 4, EntityLabel::Name, SpanSource::Model}, std::string("John"));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->start, 0u);
  EXPECT_EQ(t->end, 4u);

  EXPECT_FALSE(trim_span_punctuation(Span{0, 0, 3, EntityLabel::Name, SpanSource::Model}, std::string("...")));

  t = trim_span_punctuation(Span{0, 0, 9, EntityLabel::EmailSocial, SpanSource::Model}, std::string("bob@x.com"));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->end, 9u);  // interior '@' and '.' kept
}

TEST(Trim, UnicodeQuotes) {
  const std::string text = "«Zoë»";
  auto t = trim_span_punctuation(Span{0, 0, 5, EntityLabel::Name, SpanSource::Model}, text);
  ASSERT_TRUE(t);
  EXPECT_EQ(unicode::substr(text, t->start, t->end), "Zoë");
}

TEST(Analyze, AllOutsideRecognizerGivesEmpty) {
  const auto d = testing::dialogue("d", {{S, "hi there"}, {T, ""}, {S, "bye"}});
  FunctionRecognizer r([](const ContextWindow&) { return std::vector<TokenLabel>{}; });
  EXPECT_TRUE(analyze_dialogue(d, r).empty());
}

TEST(Analyze, SkipsDegenerateMessages) {
  const auto d = testing::dialogue("d", {{S, ""}, {T, "x"}});
  std::vector<std::size_t> seen;
  FunctionRecognizer r([&](const ContextWindow& w) {
    seen.push_back(w.target.index);
    return std::vector<TokenLabel>{};
  });
  analyze_dialogue(d, r);
  EXPECT_EQ(seen, std::vector<std::size_t>{1});
}

TEST(Analyze, WrapsRecognizerFailures) {
  const auto d = testing::dialogue("d", {{S, "a"}, {T, "b"}});
  FunctionRecognizer r([](const ContextWindow& w) -> std::vector<TokenLabel> {
    if (w.target.index == 1) return {tok("bb", 0, 2)};
    return {};
  });
  try {
    analyze_dialogue(d, r);
    FAIL();
  } catch (const RecognizerError& e) {
    EXPECT_EQ(e.message_index(), 1u);
  }
}

TEST(Analyze, SpansCarryRecognizerSource) {
  const auto d = testing::dialogue("d", {{S, "I am John."}});
  FunctionRecognizer r(
      [](const ContextWindow&) {
        return std::vector<TokenLabel>{tok("John.", 5, 10, EntityLabel::Name)};
      },
      SpanSource::Rule);
  const auto spans = analyze_dialogue(d, r);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].source, SpanSource::Rule);
  EXPECT_EQ(spans[0].end, 9u);  // trailing '.' trimmed
}

// Random tokenizations with random tags: output spans sit on word boundaries,
// never overlap, and trimming is idempotent.
TEST(AnalyzeProperty, SpansAreWordAlignedAndDisjoint) {
  std::mt19937 rng(3);
  for (int iter = 0; iter < 300; ++iter) {
    const auto text = testing::random_text(rng, 10);
    const auto cps = unicode::decode(text);
    std::vector<TokenLabel> tokens;
    std::size_t pos = 0;
    while (pos < cps.size()) {
      const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
      const std::size_t e = std::min(cps.size(), pos + len);
      IoTag tag;
      if (rng() % 3 == 0) tag = kAllEntityLabels[rng() % 3];
      if (rng() % 5) tokens.push_back(tok("", pos, e, tag));  // gaps allowed
      pos = e;
    }
    const Message m{0, T, text};
    const auto spans = aggregate_to_word_spans(m, tokens);
    const auto words = split_words(cps);
    auto is_word_start = [&](std::size_t p) {
      return std::any_of(words.begin(), words.end(), [&](const WordRange& w) { return w.start == p; });
    };
    auto is_word_end = [&](std::size_t p) {
      return std::any_of(words.begin(), words.end(), [&](const WordRange& w) { return w.end == p; });
    };
    for (std::size_t i = 0; i < spans.size(); ++i) {
      EXPECT_TRUE(is_word_start(spans[i].start));
      EXPECT_TRUE(is_word_end(spans[i].end));
      if (i) {
        EXPECT_LE(spans[i - 1].end, spans[i].start);
      }
      const auto t = trim_span_punctuation(spans[i], std::u32string_view(cps));
      if (t) {
        EXPECT_GE(t->start, spans[i].start);
        EXPECT_LE(t->end, spans[i].end);
        const auto again = trim_span_punctuation(*t, std::u32string_view(cps));
        ASSERT_TRUE(again);
        EXPECT_EQ(*again, *t);
      }
    }
  }
}

TEST(AnalyzeProperty, DeterministicAcrossRuns) {
  std::mt19937 rng(5);
  Dialogue d;
  d.id = "d";
  for (std::size_t i = 0; i < 20; ++i) d.messages.push_back({i, i % 2 ? T : S, testing::random_text(rng)});
  FunctionRecognizer r([](const ContextWindow& w) {
    std::vector<TokenLabel> out;
    for (const auto& wr : split_words_utf8(w.target.text)) {
      out.push_back(tok("", wr.start, wr.end, wr.start % 2 ? IoTag(EntityLabel::Name) : std::nullopt));
    }
    return out;
  });
  EXPECT_EQ(analyze_dialogue(d, r), analyze_dialogue(d, r));
}

}  // namespace
}  // namespace anonpivot
