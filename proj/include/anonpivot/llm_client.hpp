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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

namespace anonpivot::llm {

enum class Role { System, User, Assistant };

constexpr std::string_view wire_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "";
}

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::string model_name = "gpt-4o-2024-11-20";
  double temperature = 0.0;
  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

inline void validate(const ChatRequest& req) {
  if (req.messages.empty()) throw std::invalid_argument("chat request has no messages");
  if (!(req.temperature >= 0.0)) throw std::invalid_argument("chat temperature must be >= 0");
}

/// Moderation categories a verdict may carry.
inline const std::set<std::string>& moderation_categories() {
  static const std::set<std::string> kCategories{
      "sexual",          "sexual/minors",      "harassment",
      "harassment/threatening", "hate",        "hate/threatening",
      "illicit",         "illicit/violent",    "self-harm",
      "self-harm/intent", "self-harm/instructions", "violence",
      "violence/graphic",
  };
  return kCategories;
}

struct ModerationVerdict {
  bool flagged = false;
  std::set<std::string> categories;
  friend bool operator==(const ModerationVerdict&, const ModerationVerdict&) = default;
};

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Worth retrying: connection failures, 429 and 5xx responses.
class TransientError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

class TimeoutError : public TransientError {
 public:
  using TransientError::TransientError;
};

/// Rejected credentials. Never retried.
class AuthError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

/// The service answered with something that does not fit the contract.
class ResponseFormatError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

class RetriesExhausted : public ServiceError {
 public:
  RetriesExhausted(std::size_t attempts, const std::string& last)
      : ServiceError("gave up after " + std::to_string(attempts) + " attempt(s): " + last),
        attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

/// Builds a verdict from raw category names, rejecting unknown ones.
inline ModerationVerdict make_verdict(const std::set<std::string>& categories) {
  for (const auto& c : categories) {
    if (!moderation_categories().count(c)) {
      throw ResponseFormatError("unknown moderation category '" + c + "'");
    }
  }
  return {!categories.empty(), categories};
}

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant content for `req`.
  virtual std::string send_chat(const ChatRequest& req) = 0;
};

class ModerationClient {
 public:
  virtual ~ModerationClient() = default;
  virtual ModerationVerdict moderate(const std::string& text) = 0;
};

// ---------------------------------------------------------------------------
// Time, retry, rate limiting

class Clock {
 public:
  using duration = std::chrono::nanoseconds;
  virtual ~Clock() = default;
  virtual duration now() = 0;
  virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
 public:
  duration now() override {
    return std::chrono::duration_cast<duration>(
        std::chrono::steady_clock::now().time_since_epoch());
  }
  void sleep_for(duration d) override { std::this_thread::sleep_for(d); }
};

/// Test clock: sleeping advances time instantly.
class ManualClock final : public Clock {
 public:
  duration now() override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_for(duration d) override {
    std::lock_guard lock(mu_);
    now_ += d;
    sleeps_.push_back(d);
  }
  void advance(duration d) {
    std::lock_guard lock(mu_);
    now_ += d;
  }
  std::vector<duration> sleeps() const {
    std::lock_guard lock(mu_);
    return sleeps_;
  }

 private:
  mutable std::mutex mu_;
  duration now_{0};
  std::vector<duration> sleeps_;
};

struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::chrono::milliseconds initial_delay{500};
  double backoff_factor = 2.0;
  std::chrono::milliseconds max_delay{8000};
  /// Total wall-clock allowance for one call including waits.
  std::chrono::milliseconds budget{60000};

  std::chrono::milliseconds delay_before(std::size_t attempt) const {
    // attempt is 1-based; the first retry (attempt 2) waits initial_delay
    const double ms = static_cast<double>(initial_delay.count()) *
                      std::pow(backoff_factor, static_cast<double>(attempt - 2));
    return std::chrono::milliseconds(
        static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
  }
};

/// Runs `fn` with exponential backoff over TransientError. Never waits past
/// the policy budget; AuthError and other errors propagate immediately.
template <typename Fn>
auto with_retry(Fn&& fn, const RetryPolicy& policy, Clock& clock) -> decltype(fn()) {
  if (policy.max_attempts == 0) throw std::invalid_argument("retry policy needs >= 1 attempt");
  const auto started = clock.now();
  std::string last;
  for (std::size_t attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempt > 1) {
      const auto wait = policy.delay_before(attempt);
      const auto elapsed = clock.now() - started;
      if (elapsed + wait > policy.budget) throw RetriesExhausted(attempt - 1, last + " (budget spent)");
      clock.sleep_for(wait);
    }
    try {
      return fn();
    } catch (const TransientError& e) {
      last = e.what();
    }
  }
  throw RetriesExhausted(policy.max_attempts, last);
}

/// Token bucket shared by all workers using one client.
class TokenBucket {
 public:
  TokenBucket(double tokens_per_second, double burst, Clock& clock)
      : rate_(tokens_per_second), burst_(burst), tokens_(burst), clock_(clock),
        last_(clock.now()) {
    if (!(rate_ > 0) || !(burst_ >= 1)) throw std::invalid_argument("invalid token bucket");
  }

  void acquire() {
    std::lock_guard lock(mu_);
    refill();
    if (tokens_ < 1.0) {
      const double need = (1.0 - tokens_) / rate_;
      clock_.sleep_for(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(need)));
      refill();
      tokens_ = std::max(tokens_, 1.0);
    }
    tokens_ -= 1.0;
  }

 private:
  void refill() {
    const auto now = clock_.now();
    const double secs = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + secs * rate_);
  }

  double rate_;
  double burst_;
  double tokens_;
  Clock& clock_;
  Clock::duration last_;
  std::mutex mu_;
};

/// Adds rate limiting and retry to another client.
class RetryingChatClient final : public ChatClient {
 public:
  RetryingChatClient(ChatClient& inner, RetryPolicy policy, Clock& clock,
                     TokenBucket* limiter = nullptr)
      : inner_(inner), policy_(policy), clock_(clock), limiter_(limiter) {}

  std::string send_chat(const ChatRequest& req) override {
    validate(req);
    return with_retry(
        [&] {
          if (limiter_) limiter_->acquire();
          return inner_.send_chat(req);
        },
        policy_, clock_);
  }

 private:
  ChatClient& inner_;
  RetryPolicy policy_;
  Clock& clock_;
  TokenBucket* limiter_;
};

class RetryingModerationClient final : public ModerationClient {
 public:
  RetryingModerationClient(ModerationClient& inner, RetryPolicy policy, Clock& clock,
                           TokenBucket* limiter = nullptr)
      : inner_(inner), policy_(policy), clock_(clock), limiter_(limiter) {}

  ModerationVerdict moderate(const std::string& text) override {
    return with_retry(
        [&] {
          if (limiter_) limiter_->acquire();
          return inner_.moderate(text);
        },
        policy_, clock_);
  }

 private:
  ModerationClient& inner_;
  RetryPolicy policy_;
  Clock& clock_;
  TokenBucket* limiter_;
};

// ---------------------------------------------------------------------------
// Scriptable stubs

enum class FailureKind { Transient, Timeout, Auth, Format };

struct Failure {
  FailureKind kind = FailureKind::Transient;
  std::string message = "scripted failure";
};

[[noreturn]] inline void raise(const Failure& f) {
  switch (f.kind) {
    case FailureKind::Transient: throw TransientError(f.message);
    case FailureKind::Timeout: throw TimeoutError(f.message);
    case FailureKind::Auth: throw AuthError(f.message);
    case FailureKind::Format: throw ResponseFormatError(f.message);
  }
  throw ServiceError(f.message);
}

/// Replays a queue of replies or failures, then falls back to an optional
/// responder. Records every exchange.
class ScriptedChatClient final : public ChatClient {
 public:
  using Step = std::variant<std::string, Failure>;
  using Responder = std::function<std::string(const ChatRequest&)>;

  struct Exchange {
    ChatRequest request;
    std::optional<std::string> reply;
    std::string error;
  };

  ScriptedChatClient() = default;
  explicit ScriptedChatClient(std::vector<Step> steps, Responder fallback = {})
      : steps_(steps.begin(), steps.end()), fallback_(std::move(fallback)) {}
  explicit ScriptedChatClient(Responder responder) : fallback_(std::move(responder)) {}

  void push(Step s) {
    std::lock_guard lock(mu_);
    steps_.push_back(std::move(s));
  }

  std::string send_chat(const ChatRequest& req) override {
    std::optional<Step> step;
    Responder fallback;
    {
      std::lock_guard lock(mu_);
      if (!steps_.empty()) {
        step = std::move(steps_.front());
        steps_.pop_front();
      } else {
        fallback = fallback_;
      }
    }
    Exchange ex{req, std::nullopt, {}};
    try {
      if (step) {
        if (auto* f = std::get_if<Failure>(&*step)) raise(*f);
        ex.reply = std::get<std::string>(*step);
      } else if (fallback) {
        ex.reply = fallback(req);
      } else {
        throw ServiceError("scripted chat client has no reply left");
      }
    } catch (const std::exception& e) {
      ex.error = e.what();
      record(std::move(ex));
      throw;
    }
    auto reply = *ex.reply;
    record(std::move(ex));
    return reply;
  }

  std::vector<Exchange> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }
  std::size_t requests() const {
    std::lock_guard lock(mu_);
    return transcript_.size();
  }

 private:
  void record(Exchange ex) {
    std::lock_guard lock(mu_);
    transcript_.push_back(std::move(ex));
  }

  mutable std::mutex mu_;
  std::deque<Step> steps_;
  Responder fallback_;
  std::vector<Exchange> transcript_;
};

/// Flags texts according to a classifier callback; validates categories.
class ScriptedModerationClient final : public ModerationClient {
 public:
  using Classifier = std::function<std::set<std::string>(const std::string&)>;

  ScriptedModerationClient() : classify_([](const std::string&) { return std::set<std::string>{}; }) {}
  explicit ScriptedModerationClient(Classifier c) : classify_(std::move(c)) {}

  ModerationVerdict moderate(const std::string& text) override {
    {
      std::lock_guard lock(mu_);
      seen_.push_back(text);
    }
    return make_verdict(classify_(text));
  }

  std::vector<std::string> seen() const {
    std::lock_guard lock(mu_);
    return seen_;
  }

 private:
  Classifier classify_;
  mutable std::mutex mu_;
  std::vector<std::string> seen_;
};

}  // namespace anonpivot::llm
