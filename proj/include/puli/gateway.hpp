// Copyright 2026 The PULI Authors. All Rights Reserved.
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
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "puli/error.hpp"
#include "puli/prompt.hpp"

namespace puli {

struct ChatMessage {
  std::string role;  // system, user or assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  std::size_t max_tokens = 1024;
};

/// Throws InvalidArgument unless there is at least one message, the first is
/// a system or user message, every role is known, and temperature >= 0.
void validate(const ChatRequest& request);

/// Two-message request built from a template.
ChatRequest make_request(const PromptTemplate& prompt,
                         const std::map<std::string, std::string>& values, std::string model,
                         double temperature);

std::string to_wire(const ChatRequest& request);
/// Text of the first choice. Throws GatewayError(kMalformedResponse).
std::string parse_completion(const std::string& body);

enum class GatewayErrorKind { kConfiguration, kAuth, kRetriesExhausted, kMalformedResponse, kHttp };

class GatewayError : public Error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  GatewayErrorKind kind() const noexcept { return kind_; }

 private:
  GatewayErrorKind kind_;
};

struct HttpResponse {
  int status = 0;  // 0: the request never completed
  std::string body;
  std::string error;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// One POST of a JSON body. Implementations must be safe for concurrent use.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const Headers& headers) = 0;
};

/// cpp-httplib backed transport; https needs OpenSSL support in the build.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(120))
      : timeout_(timeout) {}
  HttpResponse post(const std::string& url, const std::string& body,
                    const Headers& headers) override;

 private:
  std::chrono::seconds timeout_;
};

struct GatewayConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string embeddings_endpoint = "http://127.0.0.1:8000/v1/embeddings";
  std::string summarizer_model = "summarizer";
  std::string forge_model = "forge";
  std::string judge_model = "judge";
  std::string presenter_model = "presenter";
  std::string observer_model = "observer";
  std::string embedding_model = "embedding";
  double temperature = 0.7;
  std::size_t max_tokens = 1024;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::size_t max_in_flight = 4;
};

inline constexpr const char* kApiKeyVariable = "PULI_API_KEY";

/// Chat-completion client with retries and an in-flight cap.
///
/// Network errors, 408, 429 and 5xx are retried with exponential backoff;
/// 401/403 fail at once. The credential is sent as a bearer token and never
/// logged.
class GatewayClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// Reads the credential from PULI_API_KEY when `api_key` is not given.
  GatewayClient(GatewayConfig config, std::shared_ptr<Transport> transport,
                std::optional<std::string> api_key = std::nullopt);

  const GatewayConfig& config() const { return config_; }

  std::string complete(const ChatRequest& request);
  std::vector<double> embed(const std::string& text);

  /// Replaces the backoff sleep (tests).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
  /// HTTP attempts made so far, retries included.
  std::size_t attempts() const;

 private:
  std::string post_with_retry(const std::string& url, const std::string& body);

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  std::optional<std::string> api_key_;
  Sleeper sleeper_;
  std::counting_semaphore<> in_flight_;
  mutable std::mutex stats_mutex_;
  std::size_t attempts_ = 0;
};

struct JudgeVerdict {
  std::optional<std::string> winner;  // method name; empty on abstain
  std::string raw;
  bool abstained() const { return !winner.has_value(); }
};

/// Parses a single offered letter, surrounding whitespace and one trailing
/// period allowed. Anything else yields nullopt.
std::optional<char> parse_verdict_letter(std::string_view text, std::size_t n_candidates);

/// Asks the judge which candidate conclusion is best. Candidates are keyed by
/// method name; their presentation order is a seeded shuffle and letters are
/// assigned after shuffling. Throws InvalidArgument with fewer than two.
JudgeVerdict judge(GatewayClient& client, const PromptTemplate& prompt, const std::string& golden,
                   const std::map<std::string, std::string>& candidates, std::uint64_t seed);

/// Win counts over decided verdicts; abstentions are counted separately.
class JudgeTally {
 public:
  /// Lists a method so that it appears in win_rates() even without wins.
  void add_method(const std::string& method) { wins_.try_emplace(method, 0); }
  void record(const JudgeVerdict& verdict);
  const std::map<std::string, std::size_t>& wins() const { return wins_; }
  std::size_t abstentions() const { return abstentions_; }
  std::size_t decided() const;
  std::map<std::string, double> win_rates() const;

 private:
  std::map<std::string, std::size_t> wins_;
  std::size_t abstentions_ = 0;
};

}  // namespace puli
