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

#include "puli/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <numeric>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "puli/metrics.hpp"
#include "puli/rng.hpp"

namespace puli {

using json = nlohmann::json;

void validate(const ChatRequest& request) {
  if (request.messages.empty()) throw InvalidArgument("chat request has no messages");
  const auto& first = request.messages.front().role;
  if (first != "system" && first != "user") {
    throw InvalidArgument("first chat message must be a system or user message");
  }
  for (const auto& m : request.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      throw InvalidArgument(fmt::format("unknown chat role '{}'", m.role));
    }
  }
  if (!(request.temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
}

ChatRequest make_request(const PromptTemplate& prompt,
                         const std::map<std::string, std::string>& values, std::string model,
                         double temperature) {
  // Each section only sees the slots it uses.
  auto pick = [&](const std::string& text) {
    std::map<std::string, std::string> subset;
    for (const auto& name : placeholders(text)) {
      auto it = values.find(name);
      if (it == values.end()) {
        throw InvalidArgument(fmt::format("prompt '{}': no value for slot '{}'", prompt.name(), name));
      }
      subset.emplace(name, it->second);
    }
    return subset;
  };
  for (const auto& [k, v] : values) {
    if (std::find(prompt.slots().begin(), prompt.slots().end(), k) == prompt.slots().end()) {
      throw InvalidArgument(fmt::format("prompt '{}': unknown slot '{}'", prompt.name(), k));
    }
  }
  ChatRequest request;
  request.model = std::move(model);
  request.temperature = temperature;
  request.messages.push_back({"system", prompt.render_system(pick(prompt.system()))});
  request.messages.push_back({"user", prompt.render_user(pick(prompt.user()))});
  return request;
}

std::string to_wire(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  json body = {{"model", request.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  return body.dump();
}

std::string parse_completion(const std::string& body) {
  try {
    const auto j = json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw std::runtime_error("content is not a string");
    return content.get<std::string>();
  } catch (const std::exception& e) {
    throw GatewayError(GatewayErrorKind::kMalformedResponse,
                       fmt::format("malformed completion response: {}", e.what()));
  }
}

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw GatewayError(GatewayErrorKind::kConfiguration, fmt::format("invalid endpoint '{}'", url));
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

bool transient(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpResponse HttpTransport::post(const std::string& url, const std::string& body,
                                 const Headers& headers) {
  const auto parts = split_url(url);
  httplib::Client client(parts.base);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto result = client.Post(parts.path, h, body, "application/json");
  if (!result) return {0, {}, httplib::to_string(result.error())};
  return {result->status, result->body, {}};
}

GatewayClient::GatewayClient(GatewayConfig config, std::shared_ptr<Transport> transport,
                             std::optional<std::string> api_key)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  if (!api_key_) {
    if (const char* env = std::getenv(kApiKeyVariable); env && *env) api_key_ = env;
  }
  if (config_.max_attempts < 1) {
    throw GatewayError(GatewayErrorKind::kConfiguration, "max_attempts must be at least 1");
  }
}

std::size_t GatewayClient::attempts() const {
  std::lock_guard lock(stats_mutex_);
  return attempts_;
}

std::string GatewayClient::post_with_retry(const std::string& url, const std::string& body) {
  if (!api_key_ || api_key_->empty()) {
    throw GatewayError(GatewayErrorKind::kConfiguration,
                       fmt::format("no credential: set {}", kApiKeyVariable));
  }
  if (!transport_) throw GatewayError(GatewayErrorKind::kConfiguration, "no transport configured");
  const Headers headers = {{"Authorization", "Bearer " + *api_key_},
                           {"Content-Type", "application/json"}};
  std::string last_failure;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    HttpResponse response;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      {
        std::lock_guard lock(stats_mutex_);
        ++attempts_;
      }
      response = transport_->post(url, body, headers);
    }
    if (response.status >= 200 && response.status < 300) return response.body;
    if (response.status == 401 || response.status == 403) {
      spdlog::error("gateway: {} rejected the credential (HTTP {})", url, response.status);
      throw GatewayError(GatewayErrorKind::kAuth,
                         fmt::format("authentication failed (HTTP {})", response.status));
    }
    last_failure = response.status == 0 ? fmt::format("network error: {}", response.error)
                                        : fmt::format("HTTP {}", response.status);
    if (!transient(response.status)) {
      spdlog::error("gateway: {} failed with {}", url, last_failure);
      throw GatewayError(GatewayErrorKind::kHttp, fmt::format("request failed: {}", last_failure));
    }
    spdlog::warn("gateway: attempt {}/{} to {} failed: {}", attempt, config_.max_attempts, url,
                 last_failure);
    if (attempt < config_.max_attempts) sleeper_(config_.backoff_base * (1 << (attempt - 1)));
  }
  throw GatewayError(GatewayErrorKind::kRetriesExhausted,
                     fmt::format("giving up after {} attempts: {}", config_.max_attempts,
                                 last_failure));
}

std::string GatewayClient::complete(const ChatRequest& request) {
  validate(request);
  ChatRequest wire = request;
  if (wire.model.empty()) throw InvalidArgument("chat request names no model");
  const auto body = post_with_retry(config_.endpoint, to_wire(wire));
  return parse_completion(body);
}

std::vector<double> GatewayClient::embed(const std::string& text) {
  const json request = {{"model", config_.embedding_model}, {"input", text}};
  const auto body = post_with_retry(config_.embeddings_endpoint, request.dump());
  try {
    const auto j = json::parse(body);
    auto v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    if (v.empty()) throw std::runtime_error("empty embedding");
    return v;
  } catch (const std::exception& e) {
    throw GatewayError(GatewayErrorKind::kMalformedResponse,
                       fmt::format("malformed embedding response: {}", e.what()));
  }
}

std::optional<char> parse_verdict_letter(std::string_view text, std::size_t n_candidates) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  if (!text.empty() && text.back() == '.') text.remove_suffix(1);
  if (text.size() != 1) return std::nullopt;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text.front())));
  if (c < 'A' || c >= static_cast<char>('A' + n_candidates)) return std::nullopt;
  return c;
}

JudgeVerdict judge(GatewayClient& client, const PromptTemplate& prompt, const std::string& golden,
                   const std::map<std::string, std::string>& candidates, std::uint64_t seed) {
  if (candidates.size() < 2) throw InvalidArgument("judging needs at least two candidates");
  if (candidates.size() > 26) throw InvalidArgument("at most 26 candidates can be judged");
  std::vector<const std::pair<const std::string, std::string>*> order;
  for (const auto& entry : candidates) order.push_back(&entry);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  std::string listing, letters;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const char letter = static_cast<char>('A' + i);
    if (i) listing += "\n\n";
    listing += fmt::format("Method {}:\n{}", letter, order[i]->second);
    if (i) letters += i + 1 == order.size() ? " or " : ", ";
    letters += letter;
  }
  const auto request = make_request(
      prompt, {{"golden", golden}, {"candidates", listing}, {"letters", letters}},
      client.config().judge_model, 0.0);
  JudgeVerdict verdict;
  verdict.raw = client.complete(request);
  if (auto letter = parse_verdict_letter(verdict.raw, order.size())) {
    verdict.winner = order[static_cast<std::size_t>(*letter - 'A')]->first;
  } else {
    spdlog::warn("judge: unparseable verdict recorded as abstain");
  }
  return verdict;
}

void JudgeTally::record(const JudgeVerdict& verdict) {
  if (verdict.abstained()) {
    ++abstentions_;
    return;
  }
  ++wins_[*verdict.winner];
}

std::size_t JudgeTally::decided() const {
  return std::accumulate(wins_.begin(), wins_.end(), std::size_t{0},
                         [](std::size_t acc, const auto& kv) { return acc + kv.second; });
}

std::map<std::string, double> JudgeTally::win_rates() const { return win_rate(wins_); }

}  // namespace puli
