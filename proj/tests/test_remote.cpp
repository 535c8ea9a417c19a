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

#include <memory>

#include "puli/remote.hpp"
#include "support.hpp"

using namespace puli;
using namespace puli::testing;

namespace {

struct Remote {
  std::shared_ptr<ScriptedTransport> transport = std::make_shared<ScriptedTransport>();
  GatewayClient client{GatewayConfig{}, transport, std::string("k")};
  Remote() { client.set_sleeper([](auto) {}); }
};

PromptTemplate prompt(const char* name) { return PromptTemplate::load(default_prompts_dir() / name); }

}  // namespace

TEST(ParseObserverAnswer, Formats) {
  EXPECT_EQ(parse_observer_answer("No Need Intervention"), 0.0);
  EXPECT_EQ(parse_observer_answer("  no need intervention."), 0.0);
  EXPECT_EQ(parse_observer_answer("Intervention Content: refocus on binding"), 1.0);
  EXPECT_THROW(parse_observer_answer("maybe"), GatewayError);
}

TEST(TruncateTokens, CutsAfterNthToken) {
  EXPECT_EQ(truncate_tokens("a b, c d", 2), "a b");
  EXPECT_EQ(truncate_tokens("a b", 5), "a b");
  EXPECT_EQ(count_tokens(truncate_tokens("one two three four five", 3)), 3u);
}

TEST(LlmSummarizer, OutputCappedAtTokenLimit) {
  Remote r;
  r.transport->set_default_reply("w1 w2 w3 w4 w5 w6 w7 w8 w9 w10");
  LlmSummarizer s(r.client, prompt("summarizer.txt"), 4);
  const auto proposal = make_proposal("p");
  const auto d = make_dialogue("d", "p", Split::kTrain, 4, 1);
  const auto out = s.summarize(proposal, "earlier", std::span(d.rounds).first(3));
  EXPECT_EQ(count_tokens(out), 4u);
  EXPECT_EQ(s.max_summary_tokens(), 4u);
  const auto body = nlohmann::json::parse(r.transport->requests.at(0).body);
  const std::string user = body["messages"][1]["content"];
  EXPECT_NE(user.find(d.rounds[2].text), std::string::npos);
}

TEST(RemoteBackends, ObserverAndPresenterCalls) {
  Remote r;
  const auto proposal = make_proposal("p");
  const auto d = make_dialogue("d", "p", Split::kTrain, 4, 1);
  const ContextualMemory m{std::cref(proposal), {d.rounds[0], d.rounds[1]}, "sum"};
  RemoteObserver obs(r.client, prompt("icl_baseline.txt"), "", 3);
  r.transport->push(200, ScriptedTransport::completion("Intervention Content: stop"));
  EXPECT_EQ(obs.predict(m), 1.0);
  r.transport->push(200, R"({"data":[{"embedding":[1,2,3]}]})");
  EXPECT_EQ(obs.embed(m).size(), 3u);
  r.transport->push(200, R"({"data":[{"embedding":[1,2]}]})");
  EXPECT_THROW(obs.embed(m), Error);

  RemotePresenter pres(r.client, prompt("presenter.txt"), 2);
  r.transport->push(200, ScriptedTransport::completion("Please return to the kinase goal."));
  EXPECT_EQ(pres.generate(m), "Please return to the kinase goal.");
}
