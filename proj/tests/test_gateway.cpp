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

#include <gtest/gtest.h>

#include <cstdlib>
#include <memory>
#include <sstream>
#include <thread>
#include <atomic>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "puli/gateway.hpp"
#include "support.hpp"

using namespace puli;
using namespace puli::testing;

namespace {

constexpr const char* kSecret = "sk-test-0123456789abcdef";

struct Fixture {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  std::vector<std::chrono::milliseconds> sleeps;
  GatewayClient client;

  explicit Fixture(GatewayConfig config = {})
      : client(std::move(config), transport, std::string(kSecret)) {
    client.set_sleeper([this](std::chrono::milliseconds ms) { sleeps.push_back(ms); });
  }
};

ChatRequest hello() {
  ChatRequest r;
  r.model = "m";
  r.messages = {{"system", "sys"}, {"user", "hello"}};
  return r;
}

PromptTemplate judge_prompt() { return PromptTemplate::load(default_prompts_dir() / "judge.txt"); }

}  // namespace

TEST(ChatRequest, Validation) {
  auto r = hello();
  EXPECT_NO_THROW(validate(r));
  r.messages.front().role = "assistant";
  EXPECT_THROW(validate(r), InvalidArgument);
  r.messages.clear();
  EXPECT_THROW(validate(r), InvalidArgument);
  r = hello();
  r.temperature = -0.1;
  EXPECT_THROW(validate(r), InvalidArgument);
  r = hello();
  r.messages.push_back({"tool", "x"});
  EXPECT_THROW(validate(r), InvalidArgument);
}

TEST(Wire, RequestShapeAndCompletionParsing) {
  const auto j = nlohmann::json::parse(to_wire(hello()));
  EXPECT_EQ(j["model"], "m");
  EXPECT_EQ(j["messages"][1]["content"], "hello");
  EXPECT_EQ(j["messages"][0]["role"], "system");
  EXPECT_EQ(parse_completion(ScriptedTransport::completion("hi")), "hi");
  try {
    parse_completion("{\"choices\": []}");
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kMalformedResponse);
  }
}

TEST(GatewayClient, EchoAndBearerHeader) {
  Fixture f;
  f.transport->push(200, ScriptedTransport::completion("hello"));
  EXPECT_EQ(f.client.complete(hello()), "hello");
  ASSERT_EQ(f.transport->requests.size(), 1u);
  const auto& h = f.transport->requests[0].headers;
  EXPECT_NE(std::find(h.begin(), h.end(), std::pair<std::string, std::string>{"Authorization", std::string("Bearer ") + kSecret}), h.end());
}

TEST(GatewayClient, RetriesTransientFailures) {
  Fixture f;
  f.transport->push(503, "busy");
  f.transport->push_network_error();
  f.transport->push(200, ScriptedTransport::completion("ok"));
  EXPECT_EQ(f.client.complete(hello()), "ok");
  EXPECT_EQ(f.client.attempts(), 3u);
  EXPECT_EQ(f.sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)}));
}

TEST(GatewayClient, RetriesExhausted) {
  Fixture f;
  for (int i = 0; i < 3; ++i) f.transport->push(429, "slow down");
  try {
    f.client.complete(hello());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kRetriesExhausted);
  }
  EXPECT_EQ(f.client.attempts(), 3u);
}

TEST(GatewayClient, AuthFailureIsNotRetried) {
  Fixture f;
  f.transport->push(401, "bad key");
  f.transport->push(200, ScriptedTransport::completion("never"));
  try {
    f.client.complete(hello());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kAuth);
  }
  EXPECT_EQ(f.client.attempts(), 1u);
}

TEST(GatewayClient, MissingCredentialFailsBeforeAnyRequest) {
  ::unsetenv(kApiKeyVariable);
  auto transport = std::make_shared<ScriptedTransport>();
  transport->set_default_reply("x");
  GatewayClient client({}, transport);
  try {
    client.complete(hello());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kConfiguration);
  }
  EXPECT_TRUE(transport->requests.empty());
  EXPECT_EQ(client.attempts(), 0u);
}

TEST(GatewayClient, ReadsCredentialFromEnvironment) {
  ::setenv(kApiKeyVariable, kSecret, 1);
  auto transport = std::make_shared<ScriptedTransport>();
  transport->set_default_reply("x");
  GatewayClient client({}, transport);
  EXPECT_EQ(client.complete(hello()), "x");
  ::unsetenv(kApiKeyVariable);
}

TEST(GatewayClient, CredentialNeverLogged) {
  std::ostringstream captured;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(captured);
  auto logger = std::make_shared<spdlog::logger>("capture", sink);
  logger->set_level(spdlog::level::trace);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  {
    Fixture f;
    f.transport->push(500, std::string("echo Bearer ") + kSecret);
    f.transport->push_network_error();
    f.transport->push(200, ScriptedTransport::completion("fine"));
    f.client.complete(hello());
    f.transport->push(401, kSecret);
    EXPECT_THROW(f.client.complete(hello()), GatewayError);
    f.transport->push(400, kSecret);
    EXPECT_THROW(f.client.complete(hello()), GatewayError);
  }
  spdlog::set_default_logger(previous);
  EXPECT_FALSE(captured.str().empty());
  EXPECT_EQ(captured.str().find(kSecret), std::string::npos);
}

TEST(GatewayClient, EmbeddingsEndpoint) {
  Fixture f;
  f.transport->push(200, R"({"data":[{"embedding":[0.5,-1.0,2.0]}]})");
  EXPECT_EQ(f.client.embed("text"), (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_EQ(f.transport->requests[0].url, f.client.config().embeddings_endpoint);
  f.transport->push(200, R"({"data":[]})");
  EXPECT_THROW(f.client.embed("text"), GatewayError);
}

TEST(ParseVerdictLetter, SingleOfferedLetter) {
  EXPECT_EQ(parse_verdict_letter("B", 3), 'B');
  EXPECT_EQ(parse_verdict_letter("  C.\n", 3), 'C');
  EXPECT_EQ(parse_verdict_letter("AB", 3), std::nullopt);
  EXPECT_EQ(parse_verdict_letter("D", 3), std::nullopt);
  EXPECT_EQ(parse_verdict_letter("", 3), std::nullopt);
  EXPECT_EQ(parse_verdict_letter("Method B", 3), std::nullopt);
}

TEST(Judge, MockReturningB) {
  Fixture f;
  f.transport->set_default_reply("B");
  const std::map<std::string, std::string> cands{{"PULI", "c1"}, {"Standard", "c2"}};
  const auto v = judge(f.client, judge_prompt(), "gold", cands, 1);
  ASSERT_FALSE(v.abstained());
  EXPECT_TRUE(cands.count(*v.winner));
  EXPECT_EQ(v.raw, "B");
  const auto body = nlohmann::json::parse(f.transport->requests[0].body);
  const std::string user = body["messages"][1]["content"];
  EXPECT_NE(user.find("Method A:"), std::string::npos);
  EXPECT_NE(user.find("Method B:"), std::string::npos);
  EXPECT_NE(user.find("gold"), std::string::npos);
  const std::string system = body["messages"][0]["content"];
  EXPECT_NE(system.find("(A or B)"), std::string::npos);
}

TEST(Judge, AbstainAndPreconditions) {
  Fixture f;
  f.transport->set_default_reply("AB");
  const auto v = judge(f.client, judge_prompt(), "gold", {{"x", "1"}, {"y", "2"}}, 1);
  EXPECT_TRUE(v.abstained());
  JudgeTally tally;
  tally.add_method("x");
  tally.add_method("y");
  tally.record(v);
  EXPECT_EQ(tally.abstentions(), 1u);
  EXPECT_EQ(tally.decided(), 0u);
  EXPECT_THROW(judge(f.client, judge_prompt(), "gold", {{"x", "1"}}, 1), InvalidArgument);
}

namespace {

// Judge that always names the letter shown next to the text "best".
class PickBestTransport final : public Transport {
 public:
  HttpResponse post(const std::string&, const std::string& body, const Headers&) override {
    const std::string user = nlohmann::json::parse(body)["messages"][1]["content"];
    const auto at = user.find("best");
    const auto label = user.rfind("Method ", at);
    return {200, ScriptedTransport::completion(std::string(1, user[label + 7])), {}};
  }
};

}  // namespace

TEST(Judge, TallyInvariantToPresentationOrder) {
  GatewayClient client({}, std::make_shared<PickBestTransport>(), std::string(kSecret));
  const std::map<std::string, std::string> cands{
      {"PULI", "the best answer"}, {"Standard", "plain"}, {"ICL", "other"}, {"Random", "noise"}};
  JudgeTally tally;
  for (const auto& [m, _] : cands) tally.add_method(m);
  for (std::uint64_t seed = 0; seed < 40; ++seed) tally.record(judge(client, judge_prompt(), "gold", cands, seed));
  EXPECT_EQ(tally.wins().at("PULI"), 40u);
  const auto rates = tally.win_rates();
  EXPECT_DOUBLE_EQ(rates.at("PULI"), 1.0);
  EXPECT_DOUBLE_EQ(rates.at("ICL"), 0.0);
}

TEST(GatewayClient, InFlightCap) {
  class SlowTransport final : public Transport {
   public:
    std::atomic<int> now{0}, peak{0};
    HttpResponse post(const std::string&, const std::string&, const Headers&) override {
      const int n = ++now;
      int p = peak.load();
      while (n > p && !peak.compare_exchange_weak(p, n)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --now;
      return {200, ScriptedTransport::completion("ok"), {}};
    }
  };
  auto transport = std::make_shared<SlowTransport>();
  GatewayConfig config;
  config.max_in_flight = 2;
  GatewayClient client(config, transport, std::string(kSecret));
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { client.complete(hello()); });
  for (auto& t : threads) t.join();
  EXPECT_LE(transport->peak.load(), 2);
  EXPECT_EQ(client.attempts(), 8u);
}
