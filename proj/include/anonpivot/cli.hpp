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
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anonpivot/analysis.hpp"
#include "anonpivot/anonymize.hpp"
#include "anonpivot/corpus.hpp"
#include "anonpivot/curate.hpp"
#include "anonpivot/evalx.hpp"
#include "anonpivot/http.hpp"
#include "anonpivot/llm_client.hpp"
#include "anonpivot/model_adapter.hpp"
#include "anonpivot/parallel.hpp"
#include "anonpivot/rules.hpp"
#include "anonpivot/stub_llm.hpp"

/// The `anonpivot` command line: analyze, anonymize, evaluate, stats, curate.
namespace anonpivot::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kIoError = 2,
  kRecognizerError = 3,
  kMappingExhausted = 4,
  kServiceError = 5,
};

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

/// Settings shared by all subcommands. Values come from defaults, then the
/// --config JSON file, then explicit flags.
struct PipelineConfig {
  std::string recognizer = "rule";  // rule | model
  std::optional<fs::path> rules;
  std::optional<std::string> model_url;
  bool model_serial = false;
  std::optional<fs::path> guidance;
  double max_similarity = 0.5;
  std::size_t max_rounds = 3;
  std::size_t window = 1;
  std::string llm = "http";  // http | synthetic | identity | scripted
  std::optional<fs::path> llm_script;
  std::string model_name = "gpt-4o-2024-11-20";
  double temperature = 0.0;
  double requests_per_second = 5.0;
  std::string moderation = "none";  // none | http
  LengthThresholds length;
  SelectionConstraints selection;
  std::optional<fs::path> blocklist;
  std::size_t n = 1;
  std::size_t jobs = 1;
};

inline void apply_config_json(PipelineConfig& c, const nlohmann::json& j, const fs::path& base) {
  auto path_of = [&](const nlohmann::json& v) {
    fs::path p = v.get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  try {
    if (j.contains("recognizer")) c.recognizer = j.at("recognizer").get<std::string>();
    if (j.contains("rules")) c.rules = path_of(j.at("rules"));
    if (j.contains("model_url")) c.model_url = j.at("model_url").get<std::string>();
    if (j.contains("model_serial")) c.model_serial = j.at("model_serial").get<bool>();
    if (j.contains("guidance")) c.guidance = path_of(j.at("guidance"));
    if (j.contains("max_similarity")) c.max_similarity = j.at("max_similarity").get<double>();
    if (j.contains("max_rounds")) c.max_rounds = j.at("max_rounds").get<std::size_t>();
    if (j.contains("window")) c.window = j.at("window").get<std::size_t>();
    if (j.contains("llm")) c.llm = j.at("llm").get<std::string>();
    if (j.contains("llm_script")) c.llm_script = path_of(j.at("llm_script"));
    if (j.contains("model_name")) c.model_name = j.at("model_name").get<std::string>();
    if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
    if (j.contains("requests_per_second")) c.requests_per_second = j.at("requests_per_second").get<double>();
    if (j.contains("moderation")) c.moderation = j.at("moderation").get<std::string>();
    if (j.contains("min_total")) c.length.min_total = j.at("min_total").get<std::size_t>();
    if (j.contains("min_each")) c.length.min_each = j.at("min_each").get<std::size_t>();
    if (j.contains("max_per_dq")) c.selection.max_per_dq = j.at("max_per_dq").get<std::size_t>();
    if (j.contains("max_unique_dq")) c.selection.max_unique_dq = j.at("max_unique_dq").get<std::size_t>();
    if (j.contains("target_size")) c.selection.target_size = j.at("target_size").get<std::size_t>();
    if (j.contains("blocklist")) c.blocklist = path_of(j.at("blocklist"));
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kConfigError, std::string("bad config value: ") + e.what());
  }
}

inline void validate_config(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw CliError(kConfigError, m); };
  if (c.recognizer != "rule" && c.recognizer != "model") fail("recognizer must be 'rule' or 'model'");
  if (c.llm != "http" && c.llm != "synthetic" && c.llm != "identity" && c.llm != "scripted") {
    fail("llm must be one of http, synthetic, identity, scripted");
  }
  if (c.moderation != "none" && c.moderation != "http") fail("moderation must be 'none' or 'http'");
  if (!(c.max_similarity >= 0.0 && c.max_similarity <= 1.0)) fail("max_similarity must be in [0, 1]");
  if (c.max_rounds < 1 || c.max_rounds > 20) fail("max_rounds must be in [1, 20]");
  if (c.window < 1 || c.window > 10) fail("window must be in [1, 10]");
  if (c.n < 1 || c.n > 10) fail("n must be in [1, 10]");
  if (c.jobs < 1 || c.jobs > 256) fail("jobs must be in [1, 256]");
  if (c.temperature < 0.0) fail("temperature must be >= 0");
  if (!(c.requests_per_second > 0.0)) fail("requests_per_second must be > 0");
  if (c.selection.max_per_dq == 0 || c.selection.max_unique_dq == 0 || c.selection.target_size == 0) {
    fail("selection constraints must be positive");
  }
  for (const auto* p : {&c.rules, &c.guidance, &c.llm_script, &c.blocklist}) {
    if (*p && !fs::exists(**p)) fail("file not found: " + (*p)->string());
  }
}

/// Stderr logger. Span surfaces are printed only with --unsafe-log.
struct Log {
  std::ostream& err;
  int verbosity = 0;
  bool unsafe = false;

  void info(const std::string& m) const {
    if (verbosity >= 1) err << m << '\n';
  }
  void error(const std::string& m) const { err << "error: " << m << '\n'; }
  std::string describe(const Dialogue& d, const Span& s) const {
    std::ostringstream o;
    o << d.id << " m" << s.message_index << " [" << s.start << "," << s.end << ") "
      << wire_name(s.label);
    if (unsafe) o << " \"" << span_surface(d, s) << '"';
    return o.str();
  }
};

inline std::vector<Dialogue> read_input(const fs::path& p) {
  try {
    return load_corpus(p);
  } catch (const CorpusIoError& e) {
    throw CliError(kIoError, e.what());
  } catch (const CorpusError& e) {
    throw CliError(kIoError, p.string() + ": " + e.what());
  }
}

inline void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(kIoError, "cannot write '" + p.string() + "'");
  for (const auto& l : lines) out << l << '\n';
  if (!out.flush()) throw CliError(kIoError, "write failed for '" + p.string() + "'");
}

inline void write_output(const std::vector<Dialogue>& ds, const fs::path& p) {
  try {
    save_corpus(ds, p);
  } catch (const CorpusError& e) {
    throw CliError(kIoError, e.what());
  }
}

inline bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  if (fs::exists(a, ec) && fs::exists(b, ec)) return fs::equivalent(a, b, ec);
  return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

inline std::string fixed(double v, int prec) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << v;
  return o.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct CommonArgs {
  std::optional<fs::path> corpus;
  std::optional<fs::path> out;
  std::optional<fs::path> config;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> seed;  // reserved; every stage is deterministic
  std::optional<std::size_t> n;
  int verbosity = 0;
  bool unsafe_log = false;
};

struct Overrides {
  std::optional<std::string> recognizer, model_url, llm, model_name, moderation;
  std::optional<fs::path> rules, guidance, llm_script, blocklist;
  std::optional<double> max_similarity, temperature;
  std::optional<std::size_t> max_rounds, window, min_total, min_each, max_per_dq, max_unique_dq,
      target_size;
  bool model_serial = false;
};

inline PipelineConfig resolve_config(const CommonArgs& a, const Overrides& o) {
  PipelineConfig c;
  if (a.config) {
    std::ifstream in(*a.config);
    if (!in) throw CliError(kConfigError, "cannot open config '" + a.config->string() + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw CliError(kConfigError, "config '" + a.config->string() + "': " + e.what());
    }
    apply_config_json(c, j, a.config->parent_path());
  }
  if (a.jobs) c.jobs = *a.jobs;
  if (a.n) c.n = *a.n;
  if (o.recognizer) c.recognizer = *o.recognizer;
  if (o.model_url) c.model_url = *o.model_url;
  if (o.model_serial) c.model_serial = true;
  if (o.llm) c.llm = *o.llm;
  if (o.model_name) c.model_name = *o.model_name;
  if (o.moderation) c.moderation = *o.moderation;
  if (o.rules) c.rules = *o.rules;
  if (o.guidance) c.guidance = *o.guidance;
  if (o.llm_script) c.llm_script = *o.llm_script;
  if (o.blocklist) c.blocklist = *o.blocklist;
  if (o.max_similarity) c.max_similarity = *o.max_similarity;
  if (o.temperature) c.temperature = *o.temperature;
  if (o.max_rounds) c.max_rounds = *o.max_rounds;
  if (o.window) c.window = *o.window;
  if (o.min_total) c.length.min_total = *o.min_total;
  if (o.min_each) c.length.min_each = *o.min_each;
  if (o.max_per_dq) c.selection.max_per_dq = *o.max_per_dq;
  if (o.max_unique_dq) c.selection.max_unique_dq = *o.max_unique_dq;
  if (o.target_size) c.selection.target_size = *o.target_size;
  validate_config(c);
  return c;
}

inline const fs::path& require(const std::optional<fs::path>& p, const char* flag) {
  if (!p) throw CliError(kConfigError, std::string(flag) + " is required");
  return *p;
}

inline std::unique_ptr<Recognizer> make_recognizer(const PipelineConfig& c) {
  if (c.recognizer == "model") {
    if (!c.model_url) throw CliError(kConfigError, "model recognizer needs --model-url");
    ModelEndpointConfig ep;
    ep.url = *c.model_url;
    ep.api_key = http::env("ANONPIVOT_MODEL_KEY");
    ep.concurrent = !c.model_serial;
    return model_recognizer_adapter(ep);
  }
  if (!c.rules) throw CliError(kConfigError, "rule recognizer needs --rules");
  try {
    return rule_recognizer(load_rules_config(*c.rules));
  } catch (const RulesConfigError& e) {
    throw CliError(kConfigError, e.what());
  }
}

inline int cmd_analyze(const CommonArgs& a, const PipelineConfig& c, std::ostream& out, const Log& log) {
  const auto in = require(a.corpus, "--corpus");
  const auto dst = require(a.out, "--out");
  auto recognizer = make_recognizer(c);
  std::unique_ptr<Recognizer> lane;
  const Recognizer* r = recognizer.get();
  if (!recognizer->concurrent()) {
    lane = std::make_unique<SerialRecognizer>(*recognizer);
    r = lane.get();
  }
  auto dialogues = read_input(in);
  if (same_file(in, dst)) throw CliError(kIoError, "--out must differ from --corpus");
  try {
    parallel_for_index(dialogues.size(), c.jobs, [&](std::size_t i) {
      try {
        dialogues[i].spans = analyze_dialogue(dialogues[i], *r, c.window);
      } catch (const RecognizerError& e) {
        throw CliError(kRecognizerError, "dialogue '" + dialogues[i].id + "': " + e.what());
      }
    });
  } catch (const RulesConfigError& e) {
    throw CliError(kConfigError, e.what());
  }
  write_output(dialogues, dst);
  std::map<EntityLabel, std::size_t> counts;
  for (const auto& d : dialogues) {
    for (const auto& s : *d.spans) {
      ++counts[s.label];
      log.info("span " + log.describe(d, s));
    }
  }
  out << "label\tspans\n";
  for (auto l : kAllEntityLabels) out << wire_name(l) << '\t' << counts[l] << '\n';
  return kOk;
}

struct AnonymizeArgs {
  std::optional<fs::path> spans;
  std::optional<fs::path> report;
  bool keep_spans = false;
};

/// Owns the chat client chain selected by the config.
struct ChatStack {
  std::unique_ptr<llm::ChatClient> base;
  std::unique_ptr<llm::SystemClock> clock;
  std::unique_ptr<llm::TokenBucket> bucket;
  std::unique_ptr<llm::ChatClient> front;

  llm::ChatClient& client() { return front ? *front : *base; }
};

inline ChatStack make_chat_stack(const PipelineConfig& c) {
  ChatStack st;
  const QualityOptions q{c.max_similarity};
  if (c.llm == "synthetic") {
    st.base = std::make_unique<llm::ScriptedChatClient>(stub::synthetic_responder(q));
  } else if (c.llm == "identity") {
    st.base = std::make_unique<llm::ScriptedChatClient>(stub::identity_responder());
  } else if (c.llm == "scripted") {
    if (!c.llm_script) throw CliError(kConfigError, "llm 'scripted' needs --llm-script");
    std::ifstream in(*c.llm_script);
    std::vector<llm::ScriptedChatClient::Step> steps;
    std::string line;
    try {
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        steps.emplace_back(nlohmann::json::parse(line).get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw CliError(kConfigError, "llm script lines must be JSON strings: " + std::string(e.what()));
    }
    st.base = std::make_unique<llm::ScriptedChatClient>(std::move(steps));
  } else {
    auto cfg = http::chat_config_from_env();
    if (!cfg.api_key) throw CliError(kConfigError, "ANONPIVOT_LLM_KEY is not set");
    st.base = std::make_unique<http::HttpChatClient>(cfg);
    st.clock = std::make_unique<llm::SystemClock>();
    st.bucket = std::make_unique<llm::TokenBucket>(c.requests_per_second, std::max(1.0, c.requests_per_second), *st.clock);
    st.front = std::make_unique<llm::RetryingChatClient>(*st.base, llm::RetryPolicy{}, *st.clock, st.bucket.get());
  }
  return st;
}

inline int cmd_anonymize(const CommonArgs& a, const AnonymizeArgs& aa, const PipelineConfig& c,
                         std::ostream& out, const Log& log) {
  const auto in = require(a.corpus, "--corpus");
  const auto dst = require(a.out, "--out");
  const fs::path report = aa.report.value_or(fs::path(dst.string() + ".report.jsonl"));
  for (const auto& p : {dst, report}) {
    if (same_file(in, p) || (aa.spans && same_file(*aa.spans, p))) {
      throw CliError(kIoError, "refusing to overwrite input '" + p.string() + "'");
    }
  }
  if (same_file(dst, report)) throw CliError(kIoError, "--out and --report must differ");
  LabelGuidance guidance = default_guidance();
  if (c.guidance) {
    try {
      guidance = load_guidance(*c.guidance);
    } catch (const std::invalid_argument& e) {
      throw CliError(kConfigError, e.what());
    }
  }
  auto dialogues = read_input(in);
  if (aa.spans) {
    std::map<std::string, std::vector<Span>> by_id;
    for (auto& d : read_input(*aa.spans)) by_id[d.id] = d.spans.value_or(std::vector<Span>{});
    for (auto& d : dialogues) {
      auto it = by_id.find(d.id);
      if (it == by_id.end()) throw CliError(kIoError, "spans file has no record for '" + d.id + "'");
      d.spans = it->second;
      try {
        validate(d);
      } catch (const CorpusError& e) {
        throw CliError(kIoError, "spans for '" + d.id + "': " + e.what());
      }
    }
  }
  for (const auto& d : dialogues) {
    if (!d.spans) throw CliError(kIoError, "dialogue '" + d.id + "' has no spans; run analyze first");
  }

  auto stack = make_chat_stack(c);
  RepromptOptions opts;
  opts.max_rounds = c.max_rounds;
  opts.quality.max_similarity = c.max_similarity;
  opts.model_name = c.model_name;
  opts.temperature = c.temperature;

  struct Outcome {
    std::optional<AnonymizationResult> result;
    int code = kOk;
    std::string error;
  };
  std::vector<Outcome> outcomes(dialogues.size());
  parallel_for_index(dialogues.size(), c.jobs, [&](std::size_t i) {
    const auto& d = dialogues[i];
    try {
      outcomes[i].result = anonymize_dialogue(d, *d.spans, stack.client(), opts, guidance);
    } catch (const MappingExhausted& e) {
      outcomes[i] = {std::nullopt, kMappingExhausted, e.what()};
    } catch (const llm::ServiceError& e) {
      outcomes[i] = {std::nullopt, kServiceError, e.what()};
    } catch (const AnonymizeError& e) {
      outcomes[i] = {std::nullopt, kIoError, e.what()};
    }
  });

  std::vector<Dialogue> done;
  std::vector<std::string> reports;
  std::vector<std::string> failed;
  int code = kOk;
  std::map<EntityLabel, std::size_t> totals;
  std::size_t rounds = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    if (!o.result) {
      failed.push_back(dialogues[i].id);
      log.error("dialogue '" + dialogues[i].id + "': " + o.error);
      code = std::max(code, o.code);
      continue;
    }
    auto d = o.result->dialogue;
    if (!aa.keep_spans) d.spans.reset();
    done.push_back(std::move(d));
    reports.push_back(to_json(o.result->report).dump());
    for (const auto& [l, n] : o.result->report.replacements) totals[l] += n;
    rounds += o.result->report.reprompt_rounds;
    for (const auto& sk : o.result->report.skipped) {
      log.info("flagged " + sk.reason + ": " + log.describe(o.result->dialogue, sk.span));
    }
  }
  if (code != kOk) {
    write_output(done, dst.string() + ".partial");
    write_lines(report.string() + ".partial", reports);
    std::string ids;
    for (const auto& id : failed) ids += (ids.empty() ? "" : " ") + id;
    log.error("anonymization failed for: " + ids + " (partial outputs written with .partial suffix)");
    return code;
  }
  write_output(done, dst);
  write_lines(report, reports);
  out << "label\treplacements\n";
  for (auto l : kAllEntityLabels) out << wire_name(l) << '\t' << totals[l] << '\n';
  out << "dialogues\t" << done.size() << "\nmapping_requests\t" << rounds << '\n';
  return kOk;
}

inline void print_eval_table(const EvalReport& r, std::ostream& out) {
  out << std::left << std::setw(18) << "Label" << std::right << std::setw(8) << "TP" << std::setw(8)
      << "FP" << std::setw(8) << "FN" << std::setw(11) << "Precision" << std::setw(8) << "Recall"
      << std::setw(8) << "F1" << '\n';
  auto row = [&](const std::string& name, const LabelCounts& c) {
    const double p = safe_ratio(c.tp, c.tp + c.fp);
    const double rc = safe_ratio(c.tp, c.tp + c.fn);
    out << std::left << std::setw(18) << name << std::right << std::setw(8) << c.tp << std::setw(8)
        << c.fp << std::setw(8) << c.fn << std::setw(11) << fixed(p, 3) << std::setw(8) << fixed(rc, 3)
        << std::setw(8) << fixed(f1_score(p, rc), 3) << '\n';
  };
  for (auto l : kAllEntityLabels) {
    auto it = r.per_label.find(l);
    if (it != r.per_label.end()) row(std::string(wire_name(l)), it->second);
  }
  row("micro", r.total);
}

inline int cmd_evaluate(const fs::path& pred, const fs::path& gold, const std::optional<fs::path>& dst,
                        std::ostream& out) {
  const auto p = read_input(pred);
  const auto g = read_input(gold);
  EvalReport r;
  try {
    r = evaluate_corpora(p, g);
  } catch (const EvalError& e) {
    throw CliError(kIoError, e.what());
  }
  if (dst) write_lines(*dst, {to_json(r).dump()});
  print_eval_table(r, out);
  return kOk;
}

inline void print_stats_table(const TextStats& s, const std::string& name, std::ostream& out) {
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 2) : std::string("--"); };
  out << std::left << std::setw(16) << "" << std::right << std::setw(10) << "Total" << std::setw(8)
      << "Total" << std::setw(20) << "Words per Turn" << std::setw(20) << "N-Gram Entropy" << '\n';
  out << std::left << std::setw(16) << "Dataset" << std::right << std::setw(10) << "Dialogues"
      << std::setw(8) << "Turns" << std::setw(10) << "Student" << std::setw(10) << "Tutor"
      << std::setw(10) << "Student" << std::setw(10) << "Tutor" << '\n';
  out << std::left << std::setw(16) << name << std::right << std::setw(10) << s.total_dialogues
      << std::setw(8) << s.total_turns << std::setw(10) << opt(s.student.words_per_turn) << std::setw(10)
      << opt(s.tutor.words_per_turn) << std::setw(10) << opt(s.student.ngram_entropy) << std::setw(10)
      << opt(s.tutor.ngram_entropy) << '\n';
}

inline int cmd_stats(const CommonArgs& a, const PipelineConfig& c, std::ostream& out) {
  const auto in = require(a.corpus, "--corpus");
  const auto stats = text_stats(read_input(in), c.n);
  if (a.out) write_lines(*a.out, {to_json(stats).dump()});
  print_stats_table(stats, in.stem().string(), out);
  return kOk;
}

inline int cmd_curate(const CommonArgs& a, const PipelineConfig& c, std::ostream& out, const Log& log) {
  const auto in = require(a.corpus, "--corpus");
  const auto dst = require(a.out, "--out");
  if (same_file(in, dst)) throw CliError(kIoError, "refusing to overwrite input '" + dst.string() + "'");
  auto dialogues = read_input(in);
  const auto total = dialogues.size();
  dialogues = filter_by_length(dialogues, c.length);
  const auto after_length = dialogues.size();
  if (c.blocklist) {
    std::ifstream bl(*c.blocklist);
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(bl, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line[0] != '#') terms.push_back(line);
    }
    dialogues = filter_by_blocklist(dialogues, terms).kept;
  }
  const auto after_blocklist = dialogues.size();
  if (c.moderation == "http") {
    http::HttpModerationClient raw(http::moderation_config_from_env());
    llm::SystemClock clock;
    llm::TokenBucket bucket(c.requests_per_second, std::max(1.0, c.requests_per_second), clock);
    llm::RetryingModerationClient mod(raw, llm::RetryPolicy{}, clock, &bucket);
    try {
      auto res = filter_by_moderation(dialogues, mod);
      for (const auto& f : res.flagged) {
        std::string cats;
        for (const auto& cat : f.categories) cats += (cats.empty() ? "" : ",") + cat;
        log.info("moderation flagged " + f.id + ": " + cats);
      }
      dialogues = std::move(res.kept);
    } catch (const ModerationAborted& e) {
      std::vector<std::string> lines;
      for (const auto& d : e.partial().kept) lines.push_back(d.id);
      write_lines(dst.string() + ".partial", lines);
      throw CliError(kServiceError, e.what());
    }
  }
  std::vector<Selection> picks;
  try {
    picks = greedy_downsample(tfidf_scores(dialogues), c.selection);
  } catch (const CurateError& e) {
    throw CliError(kIoError, e.what());
  }
  std::vector<std::string> lines;
  for (const auto& s : picks) lines.push_back(to_json(s).dump());
  write_lines(dst, lines);
  out << "input\t" << total << "\nafter_length\t" << after_length << "\nafter_blocklist\t" << after_blocklist
      << "\nafter_moderation\t" << dialogues.size() << "\nselected\t" << picks.size() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the binary and the tests. Returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"anonpivot: recall-first potential-PII analysis and surrogate anonymization"};
  app.require_subcommand(1);
  // One CommonArgs per subcommand: CLI11 resets flag targets shared between
  // subcommands that were not selected.
  std::map<const CLI::App*, CommonArgs> commons;
  Overrides ov;
  AnonymizeArgs aa;
  std::optional<fs::path> pred, gold;

  auto add_common = [&](CLI::App* sub) {
    auto& common = commons[sub];
    sub->add_option("--corpus", common.corpus, "Input corpus (line-delimited records)");
    sub->add_option("--out", common.out, "Output file");
    sub->add_option("--config", common.config, "JSON pipeline config; flags override it");
    sub->add_option("--jobs", common.jobs, "Worker threads");
    sub->add_option("--seed", common.seed, "Reserved");
    sub->add_option("--n", common.n, "N-gram order for entropy");
    sub->add_flag("-v,--verbose", common.verbosity, "Log progress to stderr");
    sub->add_flag("--unsafe-log", common.unsafe_log, "Include span text in logs");
  };

  auto* analyze = app.add_subcommand("analyze", "Label potential-PII spans");
  add_common(analyze);
  analyze->add_option("--recognizer", ov.recognizer, "rule | model");
  analyze->add_option("--rules", ov.rules, "Rules config (patterns and gazetteers)");
  analyze->add_option("--model-url", ov.model_url, "Recognizer endpoint URL");
  analyze->add_flag("--model-serial", ov.model_serial, "Send recognizer requests one at a time");
  analyze->add_option("--window", ov.window, "Context messages on each side");

  auto* anonymize = app.add_subcommand("anonymize", "Replace labeled spans with surrogates");
  add_common(anonymize);
  anonymize->add_option("--spans", aa.spans, "Corpus whose spans fields are used instead of inline spans");
  anonymize->add_option("--report", aa.report, "Report output (default <out>.report.jsonl)");
  anonymize->add_flag("--keep-spans", aa.keep_spans, "Keep relocated spans in the output corpus");
  anonymize->add_option("--guidance", ov.guidance, "Per-label guidance file (label = sentence)");
  anonymize->add_option("--max-rounds", ov.max_rounds, "Mapping requests per dialogue");
  anonymize->add_option("--max-similarity", ov.max_similarity, "Similarity above which a surrogate is rejected");
  anonymize->add_option("--llm", ov.llm, "http | synthetic | identity | scripted");
  anonymize->add_option("--llm-script", ov.llm_script, "Replies for --llm scripted, one JSON string per line");
  anonymize->add_option("--model-name", ov.model_name, "Chat model name");
  anonymize->add_option("--temperature", ov.temperature, "Sampling temperature");

  auto* evaluate = app.add_subcommand("evaluate", "Word-level micro P/R/F1 against gold spans");
  add_common(evaluate);
  evaluate->add_option("--pred", pred, "Corpus with predicted spans")->required();
  evaluate->add_option("--gold", gold, "Corpus with gold spans")->required();

  auto* stats = app.add_subcommand("stats", "Turn and n-gram statistics");
  add_common(stats);

  auto* curate = app.add_subcommand("curate", "Filter and downsample a corpus");
  add_common(curate);
  curate->add_option("--min-total", ov.min_total, "Minimum messages");
  curate->add_option("--min-each", ov.min_each, "Minimum messages per participant");
  curate->add_option("--max-per-dq", ov.max_per_dq, "Maximum dialogues per question");
  curate->add_option("--max-unique-dq", ov.max_unique_dq, "Maximum distinct questions");
  curate->add_option("--target-size", ov.target_size, "Dialogues to select");
  curate->add_option("--blocklist", ov.blocklist, "Terms that exclude a dialogue, one per line");
  curate->add_option("--moderation", ov.moderation, "none | http");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kConfigError;
  }

  const CommonArgs& common = commons.at(app.get_subcommands().front());
  const Log log{err, common.verbosity, common.unsafe_log};
  try {
    const auto cfg = resolve_config(common, ov);
    if (*analyze) return cmd_analyze(common, cfg, out, log);
    if (*anonymize) return cmd_anonymize(common, aa, cfg, out, log);
    if (*evaluate) return cmd_evaluate(*pred, *gold, common.out, out);
    if (*stats) return cmd_stats(common, cfg, out);
    if (*curate) return cmd_curate(common, cfg, out, log);
  } catch (const CliError& e) {
    log.error(e.what());
    return e.code();
  } catch (const llm::ServiceError& e) {
    log.error(e.what());
    return kServiceError;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kIoError;
  }
  return kConfigError;
}

}  // namespace anonpivot::cli
