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
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "anonpivot/llm_client.hpp"

/// HTTP transports for the chat-completion, moderation and recognizer
/// services.
namespace anonpivot::http {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with '/'
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("URL '" + url + "' has no scheme");
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw std::invalid_argument("unsupported URL scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

struct PostOptions {
  std::optional<std::string> bearer;
  std::chrono::milliseconds timeout{30000};
};

/// POSTs a JSON body and returns the parsed JSON reply. Maps failures onto
/// the llm error hierarchy so retry decisions stay in one place.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                                const PostOptions& opts) {
  const auto ep = split_url(url);
  httplib::Client cli(ep.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (opts.bearer) headers.emplace("Authorization", "Bearer " + *opts.bearer);
  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto msg = "POST " + ep.base + ep.path + " failed: " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw llm::TimeoutError(msg);
    }
    throw llm::TransientError(msg);
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw llm::AuthError("service rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 429 || status >= 500) {
    throw llm::TransientError("service returned HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw llm::ServiceError("service returned HTTP " + std::to_string(status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw llm::ResponseFormatError(std::string("reply is not JSON: ") + e.what());
  }
}

inline std::optional<std::string> env(const char* name) {
  if (const char* v = std::getenv(name); v && *v) return std::string(v);
  return std::nullopt;
}

struct ServiceConfig {
  std::string url;
  std::optional<std::string> api_key;
  std::string model;
  std::chrono::milliseconds timeout{60000};
};

/// Chat endpoint from ANONPIVOT_LLM_URL / ANONPIVOT_LLM_KEY.
inline ServiceConfig chat_config_from_env() {
  ServiceConfig cfg;
  cfg.url = env("ANONPIVOT_LLM_URL").value_or("https://api.openai.com/v1/chat/completions");
  cfg.api_key = env("ANONPIVOT_LLM_KEY");
  cfg.model = "gpt-4o-2024-11-20";
  return cfg;
}

/// Moderation endpoint from ANONPIVOT_MOD_URL; shares the chat key.
inline ServiceConfig moderation_config_from_env() {
  ServiceConfig cfg;
  cfg.url = env("ANONPIVOT_MOD_URL").value_or("https://api.openai.com/v1/moderations");
  cfg.api_key = env("ANONPIVOT_LLM_KEY");
  cfg.model = "omni-moderation-2024-09-26";
  return cfg;
}

/// Messages-array chat-completion client.
class HttpChatClient final : public llm::ChatClient {
 public:
  explicit HttpChatClient(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

  std::string send_chat(const llm::ChatRequest& req) override {
    llm::validate(req);
    nlohmann::json body;
    body["model"] = req.model_name.empty() ? cfg_.model : req.model_name;
    body["temperature"] = req.temperature;
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const auto& m : req.messages) {
      msgs.push_back({{"role", llm::wire_name(m.role)}, {"content", m.content}});
    }
    const auto reply = post_json(cfg_.url, body, {cfg_.api_key, cfg_.timeout});
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw llm::ResponseFormatError("chat reply lacks choices[0].message.content");
    }
  }

 private:
  ServiceConfig cfg_;
};

/// Moderation client expecting results[0].{flagged, categories{name: bool}}.
class HttpModerationClient final : public llm::ModerationClient {
 public:
  explicit HttpModerationClient(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

  llm::ModerationVerdict moderate(const std::string& text) override {
    const nlohmann::json body{{"model", cfg_.model}, {"input", text}};
    const auto reply = post_json(cfg_.url, body, {cfg_.api_key, cfg_.timeout});
    return parse_moderation_reply(reply);
  }

  static llm::ModerationVerdict parse_moderation_reply(const nlohmann::json& reply) {
    std::set<std::string> flagged;
    std::optional<bool> flag;
    try {
      const auto& result = reply.at("results").at(0);
      for (const auto& [name, value] : result.at("categories").items()) {
        if (!llm::moderation_categories().count(name)) {
          throw llm::ResponseFormatError("unknown moderation category '" + name + "'");
        }
        if (value.get<bool>()) flagged.insert(name);
      }
      if (result.contains("flagged")) flag = result.at("flagged").get<bool>();
    } catch (const nlohmann::json::exception&) {
      throw llm::ResponseFormatError("moderation reply lacks results[0].categories");
    }
    auto verdict = llm::make_verdict(flagged);
    if (flag && *flag != verdict.flagged) {
      throw llm::ResponseFormatError("moderation reply 'flagged' disagrees with its categories");
    }
    return verdict;
  }

 private:
  ServiceConfig cfg_;
};

}  // namespace anonpivot::http
