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

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "anonpivot/analysis.hpp"
#include "anonpivot/http.hpp"
#include "anonpivot/llm_client.hpp"
#include "anonpivot/unicode.hpp"

namespace anonpivot {

struct ModelEndpointConfig {
  std::string url;
  std::optional<std::string> api_key;
  std::chrono::milliseconds timeout{30000};
  /// False when the server cannot take parallel requests.
  bool concurrent = true;
};

/// Request body for one window. With a window wider than one message the
/// neighbor texts are joined by newlines, nearest message adjacent to the target.
inline nlohmann::json model_request_body(const ContextWindow& w) {
  auto join = [](const std::vector<Message>& msgs) -> nlohmann::json {
    if (msgs.empty()) return nullptr;
    std::string out;
    for (std::size_t i = 0; i < msgs.size(); ++i) {
      if (i) out += '\n';
      out += msgs[i].text;
    }
    return out;
  };
  return {{"previous", join(w.before)}, {"target", w.target.text}, {"next", join(w.after)}};
}

/// Parses and validates {"tokens": [{text, start, end, tag}]} against the target.
inline std::vector<TokenLabel> parse_model_response(const nlohmann::json& reply,
                                                    const Message& target) {
  std::vector<TokenLabel> tokens;
  try {
    for (const auto& t : reply.at("tokens")) {
      TokenLabel tok;
      tok.text = t.at("text").get<std::string>();
      const auto start = t.at("start").get<long long>();
      const auto end = t.at("end").get<long long>();
      if (start < 0 || end < 0) throw TokenRangeError("negative token offset");
      tok.start = static_cast<std::size_t>(start);
      tok.end = static_cast<std::size_t>(end);
      tok.tag = parse_io_tag(t.at("tag").get<std::string>());
      tokens.push_back(std::move(tok));
    }
  } catch (const nlohmann::json::exception& e) {
    throw llm::ResponseFormatError(std::string("malformed recognizer reply: ") + e.what());
  } catch (const UnknownWireName& e) {
    throw llm::ResponseFormatError(std::string("malformed recognizer reply: ") + e.what());
  }
  validate_tokens(unicode::length(target.text), tokens);
  return tokens;
}

/// Recognizer served over HTTP. The transport is swappable for tests.
class ModelRecognizer final : public Recognizer {
 public:
  using Transport = std::function<nlohmann::json(const nlohmann::json&)>;

  explicit ModelRecognizer(ModelEndpointConfig cfg)
      : concurrent_(cfg.concurrent),
        transport_([cfg](const nlohmann::json& body) {
          return http::post_json(cfg.url, body, {cfg.api_key, cfg.timeout});
        }) {}

  ModelRecognizer(Transport transport, bool concurrent)
      : concurrent_(concurrent), transport_(std::move(transport)) {}

  std::vector<TokenLabel> recognize(const ContextWindow& window) const override {
    return parse_model_response(transport_(model_request_body(window)), window.target);
  }

  SpanSource source() const override { return SpanSource::Model; }
  bool concurrent() const override { return concurrent_; }

 private:
  bool concurrent_;
  Transport transport_;
};

inline std::unique_ptr<Recognizer> model_recognizer_adapter(ModelEndpointConfig endpoint) {
  return std::make_unique<ModelRecognizer>(std::move(endpoint));
}

}  // namespace anonpivot
