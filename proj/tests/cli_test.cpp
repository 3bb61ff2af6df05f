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
#include <sstream>

#include <gtest/gtest.h>

#include "anonpivot/cli.hpp"
#include "test_helpers.hpp"

namespace anonpivot {
namespace {

using testing::S;
using testing::T;
namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "anonpivot");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string kRules = std::string(ANONPIVOT_SHARE_DIR) + "/rules.json";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    fixture_ = {
        testing::dialogue("d1", {{T, "Hi Amy, how are you?"}, {S, "good, email me at amy@school.com"}, {T, "Thanks Amy."}}, "q1"),
        testing::dialogue("d2", {{S, "I live in Leeds, call 07911 123456"}, {T, "Please do not share that."}}, "q2"),
        testing::dialogue("d3", {{S, "what is 3/4 of 12?"}, {T, "Try halving first."}}, "q1"),
    };
    save_corpus(fixture_, tmp_ / "in.jsonl");
  }
  fs::path p(const std::string& name) const { return tmp_ / name; }

  testing::TempDir tmp_;
  std::vector<Dialogue> fixture_;
};

TEST_F(CliTest, AnalyzeWritesPlantedSpans) {
  const auto r = run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = load_corpus(p("spans.jsonl"));
  ASSERT_EQ(out.size(), 3u);
  std::vector<std::string> found;
  for (const auto& d : out) {
    for (const auto& s : *d.spans) found.push_back(std::string(wire_name(s.label)) + ":" + unicode::substr(d.messages[s.message_index].text, s.start, s.end));
  }
  EXPECT_EQ(found, (std::vector<std::string>{"name:Amy", "email_social:amy@school.com", "name:Amy",
                                             "location_address:Leeds", "phone_number:07911 123456"}));
  EXPECT_NE(r.out.find("name\t2"), std::string::npos);
  EXPECT_TRUE(out[2].spans->empty());
}

TEST_F(CliTest, AnalyzeEmptyCorpus) {
  std::ofstream(p("empty.jsonl")).close();
  const auto r = run({"analyze", "--corpus", p("empty.jsonl").string(), "--out", p("o.jsonl").string(), "--rules", kRules});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(p("o.jsonl")), "");
}

TEST_F(CliTest, AnalyzeConfigAndIoErrors) {
  EXPECT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string(), "--rules", p("nope.json").string()}).code, 1);
  EXPECT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string()}).code, 1);
  EXPECT_EQ(run({"analyze", "--corpus", p("missing.jsonl").string(), "--out", p("o.jsonl").string(), "--rules", kRules}).code, 2);
  EXPECT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("in.jsonl").string(), "--rules", kRules}).code, 2);
  EXPECT_EQ(run({"analyze", "--bogus-flag"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string(), "--rules", kRules, "--jobs", "0"}).code, 1);
}

TEST_F(CliTest, AnalyzeRecognizerFailureIsExitThree) {
  // model endpoint that is not listening
  const auto r = run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string(), "--recognizer",
                      "model", "--model-url", "http://127.0.0.1:1/tag"});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  std::ofstream(p("cfg.json")) << R"({"rules": ")" << kRules << R"(", "jobs": 2, "window": 99})";
  EXPECT_EQ(run({"analyze", "--config", p("cfg.json").string(), "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string()}).code, 1);
  EXPECT_EQ(run({"analyze", "--config", p("cfg.json").string(), "--corpus", p("in.jsonl").string(), "--out",
                 p("o.jsonl").string(), "--window", "1"}).code, 0);
  std::ofstream(p("bad.json")) << "{not json";
  EXPECT_EQ(run({"stats", "--config", p("bad.json").string(), "--corpus", p("in.jsonl").string()}).code, 1);
}

TEST_F(CliTest, AnonymizeSyntheticIsCompleteAndIdempotent) {
  ASSERT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules}).code, 0);
  const auto r = run({"anonymize", "--corpus", p("spans.jsonl").string(), "--out", p("anon.jsonl").string(), "--llm", "synthetic", "--jobs", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = load_corpus(p("anon.jsonl"));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_FALSE(out[0].spans);
  const auto all = slurp(p("anon.jsonl"));
  for (const char* orig : {"Amy", "amy@school.com", "Leeds", "07911 123456"}) {
    EXPECT_EQ(all.find(orig), std::string::npos) << orig;
  }
  EXPECT_NE(all.find("[EMAIL_SOCIAL]"), std::string::npos);
  EXPECT_EQ(out[2].messages, fixture_[2].messages);
  const auto report = slurp(p("anon.jsonl.report.jsonl"));
  EXPECT_NE(report.find(R"("dialogue_id":"d1")"), std::string::npos);

  ASSERT_EQ(run({"anonymize", "--corpus", p("spans.jsonl").string(), "--out", p("anon2.jsonl").string(), "--llm", "synthetic", "--jobs", "1"}).code, 0);
  EXPECT_EQ(slurp(p("anon.jsonl")), slurp(p("anon2.jsonl")));
  EXPECT_EQ(slurp(p("anon.jsonl.report.jsonl")), slurp(p("anon2.jsonl.report.jsonl")));
}

TEST_F(CliTest, AnonymizeSeparateSpansFileAndKeepSpans) {
  ASSERT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules}).code, 0);
  const auto r = run({"anonymize", "--corpus", p("in.jsonl").string(), "--spans", p("spans.jsonl").string(), "--out",
                      p("anon.jsonl").string(), "--report", p("rep.jsonl").string(), "--llm", "synthetic", "--keep-spans"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = load_corpus(p("anon.jsonl"));
  EXPECT_EQ(out[1].spans->size(), 2u);
  EXPECT_TRUE(fs::exists(p("rep.jsonl")));
}

TEST_F(CliTest, AnonymizeExhaustionWritesPartials) {
  ASSERT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules}).code, 0);
  const auto r = run({"anonymize", "--corpus", p("spans.jsonl").string(), "--out", p("anon.jsonl").string(), "--llm", "identity", "--max-rounds", "2"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("d1 d2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(p("anon.jsonl")));
  ASSERT_TRUE(fs::exists(p("anon.jsonl.partial")));
  ASSERT_TRUE(fs::exists(p("anon.jsonl.report.jsonl.partial")));
  const auto partial = load_corpus(p("anon.jsonl.partial"));
  ASSERT_EQ(partial.size(), 1u);  // d3 had nothing to map
  EXPECT_EQ(partial[0].id, "d3");
}

TEST_F(CliTest, AnonymizeScriptedReplies) {
  const auto d = testing::dialogue("x", {{T, "Hi John"}});
  auto withspans = d;
  withspans.spans = std::vector<Span>{testing::span_of(d, 0, "John", EntityLabel::Name)};
  save_corpus({withspans}, p("x.jsonl"));
  std::ofstream(p("script.txt")) << nlohmann::json(R"({"mapping":[{"label":"name","original":"John","surrogate":"John"}]})").dump()
                                 << "\n"
                                 << nlohmann::json(R"({"mapping":[{"label":"name","original":"John","surrogate":"Kenji"}]})").dump()
                                 << "\n";
  const auto r = run({"anonymize", "--corpus", p("x.jsonl").string(), "--out", p("xo.jsonl").string(), "--llm", "scripted",
                      "--llm-script", p("script.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_corpus(p("xo.jsonl"))[0].messages[0].text, "Hi Kenji");
  EXPECT_NE(slurp(p("xo.jsonl.report.jsonl")).find(R"("reprompt_rounds":2)"), std::string::npos);
}

TEST_F(CliTest, AnonymizeRefusesToOverwriteInput) {
  ASSERT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules}).code, 0);
  const auto before = slurp(p("spans.jsonl"));
  EXPECT_EQ(run({"anonymize", "--corpus", p("spans.jsonl").string(), "--out", p("spans.jsonl").string(), "--llm", "synthetic"}).code, 2);
  EXPECT_EQ(run({"anonymize", "--corpus", p("spans.jsonl").string(), "--out", p("o.jsonl").string(), "--report",
                 p("spans.jsonl").string(), "--llm", "synthetic"}).code, 2);
  EXPECT_EQ(slurp(p("spans.jsonl")), before);
  // no spans at all
  EXPECT_EQ(run({"anonymize", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string(), "--llm", "synthetic"}).code, 2);
}

TEST_F(CliTest, AnonymizeHttpNeedsKey) {
  ::unsetenv("ANONPIVOT_LLM_KEY");
  ASSERT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules}).code, 0);
  EXPECT_EQ(run({"anonymize", "--corpus", p("spans.jsonl").string(), "--out", p("o.jsonl").string()}).code, 1);
}

TEST_F(CliTest, LogsRedactSurfacesByDefault) {
  auto r = run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string(), "--rules", kRules, "-v"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("d1 m0 [3,6) name"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("Amy"), std::string::npos);
  EXPECT_EQ(r.err.find("07911"), std::string::npos);
  r = run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("o.jsonl").string(), "--rules", kRules, "-v", "--unsafe-log"});
  EXPECT_NE(r.err.find("\"Amy\""), std::string::npos);
}

TEST_F(CliTest, EvaluateIdenticalCorporaIsPerfect) {
  ASSERT_EQ(run({"analyze", "--corpus", p("in.jsonl").string(), "--out", p("spans.jsonl").string(), "--rules", kRules}).code, 0);
  const auto r = run({"evaluate", "--pred", p("spans.jsonl").string(), "--gold", p("spans.jsonl").string(), "--out", p("eval.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(p("eval.jsonl")));
  EXPECT_EQ(j.at("precision"), 1.0);
  EXPECT_EQ(j.at("recall"), 1.0);
  EXPECT_EQ(j.at("f1"), 1.0);
  EXPECT_NE(r.out.find("Precision"), std::string::npos);
  EXPECT_NE(r.out.find("micro"), std::string::npos);
  EXPECT_EQ(run({"evaluate", "--pred", p("spans.jsonl").string()}).code, 1);
}

TEST_F(CliTest, StatsHeaderShape) {
  const auto r = run({"stats", "--corpus", p("in.jsonl").string(), "--out", p("stats.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* col : {"Total", "Dialogues", "Turns", "Words per Turn", "N-Gram Entropy", "Student", "Tutor"}) {
    EXPECT_NE(r.out.find(col), std::string::npos) << col;
  }
  const auto j = nlohmann::json::parse(slurp(p("stats.jsonl")));
  EXPECT_EQ(j.at("total_dialogues"), 3);
  EXPECT_EQ(j.at("total_turns"), 7);
  std::ofstream(p("empty.jsonl")).close();
  EXPECT_EQ(run({"stats", "--corpus", p("empty.jsonl").string()}).code, 0);
}

TEST_F(CliTest, CurateMatchesHandTrace) {
  // scores: a = b = ln 2 (q1), c = 0 (q1), d = ln 3 (q2) under N = 4
  auto mk = [](std::string id, std::string q, std::vector<TalkMoveLabel> moves) {
    Dialogue d;
    d.id = std::move(id);
    d.question_id = std::move(q);
    for (std::size_t i = 0; i < moves.size(); ++i) d.messages.push_back({i, i % 2 ? S : T, "m " + std::to_string(i)});
    d.talk_moves = moves;
    return d;
  };
  using M = TalkMoveLabel;
  save_corpus({mk("a", "q1", {M::Revoicing, M::None}), mk("b", "q1", {M::Revoicing, M::None}),
               mk("c", "q1", {M::None, M::None}), mk("d", "q2", {M::Restating, M::None}),
               mk("short", "q3", {M::Restating})},
              p("tm.jsonl"));
  const auto r = run({"curate", "--corpus", p("tm.jsonl").string(), "--out", p("manifest.jsonl").string(), "--min-total",
                      "2", "--min-each", "1", "--max-per-dq", "1", "--target-size", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  // N = 4 after the length filter: idf(R) = ln 2, idf(Restating) = ln 4; tf = 1
  EXPECT_EQ(slurp(p("manifest.jsonl")),
            nlohmann::ordered_json({{"id", "d"}, {"question_id", "q2"}, {"score", std::log(4.0)}, {"rank", 1}}).dump() + "\n" +
                nlohmann::ordered_json({{"id", "a"}, {"question_id", "q1"}, {"score", std::log(2.0)}, {"rank", 2}}).dump() + "\n");
  EXPECT_NE(r.out.find("after_length\t4"), std::string::npos);
  EXPECT_NE(r.out.find("selected\t2"), std::string::npos);

  std::ofstream(p("block.txt")) << "# terms\nm 1\n";
  const auto b = run({"curate", "--corpus", p("tm.jsonl").string(), "--out", p("m2.jsonl").string(), "--min-total", "1",
                      "--min-each", "0", "--blocklist", p("block.txt").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("after_blocklist\t1"), std::string::npos) << b.out;
}

TEST_F(CliTest, CurateNeedsTalkMoves) {
  EXPECT_EQ(run({"curate", "--corpus", p("in.jsonl").string(), "--out", p("m.jsonl").string(), "--min-total", "1", "--min-each", "0"}).code, 2);
}

}  // namespace
}  // namespace anonpivot
