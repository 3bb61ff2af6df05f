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

#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "anonpivot/corpus.hpp"
#include "anonpivot/unicode.hpp"
#include "test_helpers.hpp"

namespace anonpivot {
namespace {

using testing::S;
using testing::T;

TEST(Unicode, DecodeEncodeRoundTrip) {
  const std::string s = "Zoë 😀 日本 ß";
  const auto cps = unicode::decode(s);
  EXPECT_EQ(cps.size(), 10u);
  EXPECT_EQ(unicode::encode(cps), s);
}

TEST(Unicode, RejectsInvalidUtf8) {
  EXPECT_THROW(unicode::decode("\xC3"), unicode::Utf8Error);
  EXPECT_THROW(unicode::decode("\xC0\xAF"), unicode::Utf8Error);      // overlong
  EXPECT_THROW(unicode::decode("\xED\xA0\x80"), unicode::Utf8Error);  // surrogate
  EXPECT_THROW(unicode::decode("\xFF"), unicode::Utf8Error);
}

TEST(Unicode, CharacterClasses) {
  for (char32_t c : {U'.', U',', U'(', U')', U'"', U'\'', U'«', U'»', U'“', U'”', U'‘', U'’', U'¿', U'—', U'`'}) {
    EXPECT_TRUE(unicode::is_punctuation(c)) << static_cast<unsigned>(c);
  }
  for (char32_t c : {U'a', U'Z', U'0', U'é', U'+', U'$', U'😀'}) {
    EXPECT_FALSE(unicode::is_punctuation(c)) << static_cast<unsigned>(c);
  }
  EXPECT_TRUE(unicode::is_whitespace(U'　'));
  EXPECT_TRUE(unicode::is_whitespace(U' '));
  EXPECT_FALSE(unicode::is_whitespace(U'\u200B'));  // not White_Space
}

TEST(Unicode, FoldAndNormalize) {
  EXPECT_EQ(unicode::fold_utf8("JOHN Zoë ΣΑΣ"), "john zoë σασ");
  EXPECT_EQ(unicode::normalize_utf8("  John \t  SMITH "), "john smith");
  EXPECT_EQ(unicode::substr("Zoë said", 0, 3), "Zoë");
}

TEST(Corpus, LoadsWellFormedDialogue) {
  std::istringstream in(
      R"({"id":"d1","question_id":"q1","messages":[{"index":0,"speaker":"student","text":"hi"},)"
      R"({"index":1,"speaker":"tutor","text":"hello"},{"index":2,"speaker":"student","text":"ok"}]})"
      "\n");
  const auto ds = read_corpus(in);
  ASSERT_EQ(ds.size(), 1u);
  ASSERT_EQ(ds[0].messages.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ds[0].messages[i].index, i);
  EXPECT_EQ(ds[0].question_id, "q1");
  EXPECT_FALSE(ds[0].talk_moves.has_value());
  EXPECT_FALSE(ds[0].spans.has_value());
}

TEST(Corpus, IndexGapNamesMissingIndex) {
  std::istringstream in(
      "\n"
      R"({"id":"d1","question_id":null,"messages":[{"index":0,"speaker":"student","text":"a"},)"
      R"({"index":2,"speaker":"tutor","text":"b"}]})"
      "\n");
  try {
    read_corpus(in);
    FAIL() << "expected CorpusError";
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("index 1 is missing"), std::string::npos) << e.what();
  }
}

TEST(Corpus, EmptyFileIsEmptyCorpus) {
  testing::TempDir tmp;
  std::ofstream(tmp / "empty.jsonl").close();
  EXPECT_TRUE(load_corpus(tmp / "empty.jsonl").empty());
}

TEST(Corpus, MalformedRecordsReportLineAndField) {
  auto err = [](const std::string& body) -> std::string {
    std::istringstream in(body);
    try {
      read_corpus(in);
    } catch (const CorpusError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(err("{not json}\n").find("line 1"), std::string::npos);
  EXPECT_NE(err(R"({"messages":[]})").find("'id'"), std::string::npos);
  EXPECT_NE(err(R"({"id":"x","messages":[]})").find("no messages"), std::string::npos);
  EXPECT_NE(err(R"({"id":"x","messages":[{"index":0,"speaker":"robot","text":""}]})").find("speaker"),
            std::string::npos);
  EXPECT_NE(err(R"({"id":"x","messages":[{"index":0,"speaker":"tutor","text":"ab"}],)"
                R"("spans":[{"message_index":0,"start":1,"end":3,"label":"name"}]})")
                .find("invalid for message"),
            std::string::npos);
  EXPECT_NE(err(R"({"id":"x","messages":[{"index":0,"speaker":"tutor","text":"ab"}],"talk_moves":[]})")
                .find("talk_moves"),
            std::string::npos);
  EXPECT_NE(err(R"({"id":"x","messages":[{"index":0,"speaker":"tutor","text":"abcd"}],)"
                R"("spans":[{"message_index":0,"start":0,"end":2,"label":"name"},)"
                R"({"message_index":0,"start":1,"end":3,"label":"url"}]})")
                .find("overlapping"),
            std::string::npos);
}

TEST(Corpus, DegenerateMessagesAcceptedAndFlagged) {
  std::istringstream in(R"({"id":"x","messages":[{"index":0,"speaker":"tutor","text":""}]})");
  const auto ds = read_corpus(in);
  EXPECT_TRUE(ds[0].messages[0].degenerate());
}

TEST(Corpus, SpanOffsetsCountScalarValues) {
  // "Zoë" is 3 scalar values but 4 bytes
  std::istringstream in(
      R"({"id":"x","messages":[{"index":0,"speaker":"tutor","text":"Zoë"}],)"
      R"("spans":[{"message_index":0,"start":0,"end":3,"label":"name","source":"manual"}]})");
  EXPECT_NO_THROW(read_corpus(in));
}

TEST(Corpus, SaveToUnwritableLocationFails) {
  const auto d = testing::dialogue("d", {{S, "hi"}});
  EXPECT_THROW(save_corpus({d}, "/nonexistent-dir/x/out.jsonl"), CorpusIoError);
  testing::TempDir tmp;
  std::filesystem::permissions(tmp.path(), std::filesystem::perms::owner_read | std::filesystem::perms::owner_exec);
  if (::geteuid() != 0) {
    EXPECT_THROW(save_corpus({d}, tmp / "ro.jsonl"), CorpusIoError);
  }
  std::filesystem::permissions(tmp.path(), std::filesystem::perms::owner_all);
}

TEST(Corpus, RoundTripPreservesUnicodeBytes) {
  testing::TempDir tmp;
  auto d = testing::dialogue("d-ü", {{S, "emoji 😀 and accents éàü"}, {T, "日本語\tok"}}, "q");
  d.talk_moves = std::vector<TalkMoveLabel>{TalkMoveLabel::None, TalkMoveLabel::Revoicing};
  d.spans = std::vector<Span>{{0, 6, 7, EntityLabel::Name, SpanSource::Rule}};
  save_corpus({d}, tmp / "c.jsonl");
  std::ifstream in(tmp / "c.jsonl", std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(raw.find("😀"), std::string::npos);  // not \u-escaped
  EXPECT_EQ(load_corpus(tmp / "c.jsonl"), std::vector<Dialogue>{d});
}

// Generated corpora survive save -> load unchanged.
TEST(CorpusProperty, RoundTripIsIdentity) {
  std::mt19937 rng(7);
  testing::TempDir tmp;
  for (int iter = 0; iter < 40; ++iter) {
    std::vector<Dialogue> ds;
    const int nd = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int k = 0; k < nd; ++k) {
      Dialogue d;
      d.id = "d" + std::to_string(k) + testing::random_text(rng, 1);
      if (rng() % 2) d.question_id = "q" + std::to_string(rng() % 3);
      const int nm = std::uniform_int_distribution<int>(1, 6)(rng);
      for (int m = 0; m < nm; ++m) {
        d.messages.push_back({static_cast<std::size_t>(m), rng() % 2 ? S : T, testing::random_text(rng)});
      }
      if (rng() % 2) {
        std::vector<TalkMoveLabel> tm;
        for (int m = 0; m < nm; ++m) tm.push_back(kAllTalkMoves[rng() % kAllTalkMoves.size()]);
        d.talk_moves = tm;
      }
      if (rng() % 2) {
        std::vector<Span> spans;
        for (std::size_t m = 0; m < d.messages.size(); ++m) {
          const auto len = unicode::length(d.messages[m].text);
          if (len >= 2) spans.push_back({m, 0, len / 2, kAllEntityLabels[rng() % 7], SpanSource::Model});
        }
        d.spans = spans;
      }
      ds.push_back(d);
    }
    const auto path = tmp / ("rt" + std::to_string(iter) + ".jsonl");
    save_corpus(ds, path);
    ASSERT_EQ(load_corpus(path), ds) << "iteration " << iter;
  }
}

TEST(MergeTurns, GroupsConsecutiveSpeakers) {
  auto sizes = [](const Dialogue& d) {
    std::vector<std::size_t> out;
    for (const auto& t : merge_turns(d)) out.push_back(t.message_indices.size());
    return out;
  };
  EXPECT_EQ(sizes(testing::dialogue("a", {{T, "1"}, {T, "2"}, {S, "3"}, {T, "4"}})),
            (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(sizes(testing::dialogue("b", {{S, "1"}})), (std::vector<std::size_t>{1}));
  EXPECT_EQ(sizes(testing::dialogue("c", {{S, "1"}, {T, "2"}, {S, "3"}, {T, "4"}, {S, "5"}})),
            (std::vector<std::size_t>{1, 1, 1, 1, 1}));
  const auto turns = merge_turns(testing::dialogue("a", {{T, "a b"}, {T, "c"}}));
  EXPECT_EQ(turns[0].text, "a b c");
}

TEST(MergeTurnsProperty, CoversEveryMessageOnceAndAlternates) {
  std::mt19937 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    Dialogue d;
    d.id = "x";
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    for (int i = 0; i < n; ++i) d.messages.push_back({static_cast<std::size_t>(i), rng() % 2 ? S : T, "w"});
    const auto turns = merge_turns(d);
    std::vector<std::size_t> all;
    for (std::size_t t = 0; t < turns.size(); ++t) {
      if (t) {
        EXPECT_NE(turns[t].speaker, turns[t - 1].speaker);
      }
      for (auto i : turns[t].message_indices) {
        EXPECT_EQ(d.messages[i].speaker, turns[t].speaker);
        all.push_back(i);
      }
    }
    ASSERT_EQ(all.size(), d.messages.size());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  }
}

}  // namespace
}  // namespace anonpivot
