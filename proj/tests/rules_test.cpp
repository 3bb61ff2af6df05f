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

#include <gtest/gtest.h>

#include "anonpivot/analysis.hpp"
#include "anonpivot/rules.hpp"
#include "test_helpers.hpp"

namespace anonpivot {
namespace {

using testing::S;

const RuleRecognizer& shipped() {
  static const RuleRecognizer r(load_rules_config(std::filesystem::path(ANONPIVOT_SHARE_DIR) / "rules.json"));
  return r;
}

std::vector<std::pair<std::string, EntityLabel>> spans_in(const Recognizer& r, const std::string& text) {
  const auto d = testing::dialogue("d", {{S, text}});
  std::vector<std::pair<std::string, EntityLabel>> out;
  for (const auto& s : analyze_dialogue(d, r)) out.emplace_back(unicode::substr(text, s.start, s.end), s.label);
  return out;
}

using Found = std::vector<std::pair<std::string, EntityLabel>>;

TEST(Rules, EmailFromShippedConfig) {
  EXPECT_EQ(spans_in(shipped(), "email me at bob@x.com"), (Found{{"bob@x.com", EntityLabel::EmailSocial}}));
  EXPECT_EQ(spans_in(shipped(), "email me at bob@x.com."), (Found{{"bob@x.com", EntityLabel::EmailSocial}}));
}

TEST(Rules, UkMobileNumber) {
  RulesConfig cfg;
  cfg.patterns[EntityLabel::PhoneNumber] = {R"(\b07\d{3}\s?\d{6}\b)"};
  RuleRecognizer r(cfg);
  EXPECT_EQ(spans_in(r, "call 07911 123456"), (Found{{"07911 123456", EntityLabel::PhoneNumber}}));
  EXPECT_EQ(spans_in(shipped(), "call 07911 123456"), (Found{{"07911 123456", EntityLabel::PhoneNumber}}));
}

TEST(Rules, GazetteerCaseInsensitiveWholeWord) {
  RulesConfig cfg;
  cfg.gazetteers[EntityLabel::Name] = {"John"};
  RuleRecognizer r(cfg);
  EXPECT_EQ(spans_in(r, "john said hi"), (Found{{"john", EntityLabel::Name}}));
  EXPECT_TRUE(spans_in(r, "johnny said hi").empty());
  EXPECT_EQ(spans_in(r, "ask John, please"), (Found{{"John", EntityLabel::Name}}));
}

TEST(Rules, CaseSensitiveGazetteer) {
  RulesConfig cfg;
  cfg.case_insensitive = false;
  cfg.gazetteers[EntityLabel::Name] = {"Will"};
  RuleRecognizer r(cfg);
  EXPECT_TRUE(spans_in(r, "I will try").empty());
  EXPECT_EQ(spans_in(r, "Will tried"), (Found{{"Will", EntityLabel::Name}}));
}

TEST(Rules, MultiWordGazetteerEntry) {
  RulesConfig cfg;
  cfg.gazetteers[EntityLabel::SchoolName] = {"Oak  Hill Academy"};
  RuleRecognizer r(cfg);
  EXPECT_EQ(spans_in(r, "I go to oak hill academy now"), (Found{{"oak hill academy", EntityLabel::SchoolName}}));
}

TEST(Rules, EmptyConfigIsAllOutside) {
  RuleRecognizer r(RulesConfig{});
  EXPECT_TRUE(spans_in(r, "john bob@x.com 07911 123456").empty());
  const auto tokens = r.recognize(ContextWindow{{}, Message{0, S, "a b"}, {}});
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_FALSE(tokens[0].tag);
}

TEST(Rules, PriorityResolvesOverlaps) {
  RulesConfig cfg;
  cfg.gazetteers[EntityLabel::Name] = {"bob"};
  cfg.patterns[EntityLabel::EmailSocial] = {R"([a-z]+@[a-z]+\.com)"};
  RuleRecognizer r(cfg);
  EXPECT_EQ(spans_in(r, "bob@x.com"), (Found{{"bob@x.com", EntityLabel::EmailSocial}}));
}

TEST(Rules, OffsetsAreScalarValues) {
  RulesConfig cfg;
  cfg.patterns[EntityLabel::Url] = {R"(www\.[a-z]+\.com)"};
  cfg.gazetteers[EntityLabel::Name] = {"Zoë"};
  RuleRecognizer r(cfg);
  EXPECT_EQ(spans_in(r, "😀 café www.site.com ZOË"),
            (Found{{"www.site.com", EntityLabel::Url}, {"ZOË", EntityLabel::Name}}));
}

TEST(Rules, InvalidPatternRejected) {
  RulesConfig cfg;
  cfg.patterns[EntityLabel::Url] = {"(unclosed"};
  EXPECT_THROW(RuleRecognizer{cfg}, RulesConfigError);
}

TEST(Rules, ConfigParsing) {
  testing::TempDir tmp;
  std::ofstream(tmp / "n.txt") << "# comment\nJohn\n\nMary Ann\r\n";
  std::ofstream(tmp / "r.json") << R"({"gazetteer_files": {"name": "n.txt"}, "patterns": {"url": ["x"]}})";
  const auto cfg = load_rules_config(tmp / "r.json");
  EXPECT_EQ(cfg.gazetteers.at(EntityLabel::Name), (std::vector<std::string>{"John", "Mary Ann"}));
  EXPECT_EQ(cfg.patterns.at(EntityLabel::Url).size(), 1u);

  EXPECT_THROW(load_rules_config(tmp / "missing.json"), RulesConfigError);
  EXPECT_THROW(rules_config_from_json(nlohmann::json::parse(R"({"patterns": {"bogus": []}})")), RulesConfigError);
  EXPECT_THROW(rules_config_from_json(nlohmann::json::parse(R"({"priority": ["name"]})")), RulesConfigError);
  EXPECT_THROW(rules_config_from_json(nlohmann::json::parse(R"({"gazetteer_files": {"name": "nope.txt"}})"), tmp.path()),
               RulesConfigError);
  EXPECT_THROW(rules_config_from_json(nlohmann::json::array()), RulesConfigError);
}

TEST(Rules, ShippedConfigCoversCommonForms) {
  const auto& r = shipped();
  EXPECT_EQ(spans_in(r, "see https://example.org/page?id=3 now"),
            (Found{{"https://example.org/page?id=3", EntityLabel::Url}}));
  EXPECT_EQ(spans_in(r, "born 12/03/2009 ok"), (Found{{"12/03/2009", EntityLabel::DateOfBirth}}));
  EXPECT_EQ(spans_in(r, "born on 3rd March 2010"), (Found{{"3rd March 2010", EntityLabel::DateOfBirth}}));
  EXPECT_EQ(spans_in(r, "my insta: @cool_kid"), (Found{{"insta: @cool_kid", EntityLabel::EmailSocial}}));
  EXPECT_EQ(spans_in(r, "I live in Leeds with Amy"),
            (Found{{"Leeds", EntityLabel::LocationAddress}, {"Amy", EntityLabel::Name}}));
  EXPECT_TRUE(spans_in(r, "what is 3/4 of 12?").empty());
}

TEST(Rules, ConcurrentRecognizeIsSafe) {
  const auto& r = shipped();
  EXPECT_TRUE(r.concurrent());
  EXPECT_EQ(r.source(), SpanSource::Rule);
}

}  // namespace
}  // namespace anonpivot
