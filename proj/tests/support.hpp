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

// Fixtures shared by the unit tests: tiny corpora, fake backends and a
// scripted HTTP transport.

#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "puli/corpus.hpp"
#include "puli/error.hpp"
#include "puli/gateway.hpp"
#include "puli/learners.hpp"
#include "puli/memory.hpp"
#include "puli/metrics.hpp"

namespace puli::testing {

inline ProjectProposal make_proposal(std::string id, std::string goal = "map kinase inhibitor binding") {
  ProjectProposal p;
  p.id = std::move(id);
  p.goal = std::move(goal);
  p.background = "Background: prior screens found weak binders.";
  p.datasets_desc = "Datasets: assay panel.";
  p.golden_conclusion = "the inhibitor binds the kinase pocket";
  p.roles = {"Pharmacologist", "Bioinformatician"};
  return p;
}

inline InterventionPayload make_payload(std::size_t t, std::string content = "return to the goal") {
  InterventionPayload payload;
  payload.position = t;
  payload.issue_type = IssueType::kScopeDrift;
  payload.target_roles = {"Pharmacologist"};
  payload.content = std::move(content);
  return payload;
}

/// Rounds "r<t> ..." alternating two roles; the positive (and an optional
/// negative) label sits at the given steps.
inline Dialogue make_dialogue(std::string id, std::string proposal_id, Split split, std::size_t rounds,
                              std::optional<std::size_t> positive,
                              std::optional<std::size_t> negative = std::nullopt) {
  Dialogue d;
  d.id = std::move(id);
  d.proposal_id = std::move(proposal_id);
  d.split = split;
  for (std::size_t t = 0; t < rounds; ++t) {
    DialogueRound r;
    r.dialogue_id = d.id;
    r.t = t;
    r.role = t % 2 ? "Bioinformatician" : "Pharmacologist";
    r.text = fmt::format("round {} of {} discusses kinase assays. Binding looks strong.", t, d.id);
    if (positive && *positive == t) {
      r.label = RoundLabel::positive(make_payload(t, fmt::format("refocus {} on binding", d.id)));
    } else if (negative && *negative == t) {
      r.label = RoundLabel::negative();
    }
    d.rounds.push_back(std::move(r));
  }
  return d;
}

/// n_train + n_val + n_test dialogues over one proposal.
inline Corpus small_corpus(std::size_t n_train, std::size_t n_val, std::size_t n_test,
                           std::size_t rounds = 8) {
  std::vector<Dialogue> dialogues;
  std::size_t k = 0;
  auto add = [&](Split split, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i, ++k) {
      const auto pos = 1 + k % (rounds - 2);
      std::optional<std::size_t> neg;
      if (split != Split::kTrain) neg = pos == 0 ? 1 : 0;
      dialogues.push_back(make_dialogue(fmt::format("d{:03}", k), "p1", split, rounds, pos, neg));
    }
  };
  add(Split::kTrain, n_train);
  add(Split::kValidation, n_val);
  add(Split::kTest, n_test);
  return Corpus({make_proposal("p1")}, std::move(dialogues));
}

/// Deterministic summarizer that keeps the last max tokens of everything it
/// has seen and records each call.
class RecordingSummarizer final : public Summarizer {
 public:
  explicit RecordingSummarizer(std::size_t max_tokens = 32) : max_(max_tokens) {}

  std::string summarize(const ProjectProposal&, std::string_view prev_long,
                        std::span<const DialogueRound> prev_short) const override {
    TokenSeq all = tokenize(prev_long);
    for (const auto& r : prev_short) {
      const auto toks = tokenize(r.text);
      all.insert(all.end(), toks.begin(), toks.end());
    }
    if (all.size() > max_) all.erase(all.begin(), all.end() - static_cast<std::ptrdiff_t>(max_));
    std::string out;
    for (const auto& t : all) out += (out.empty() ? "" : " ") + t;
    std::lock_guard lock(mutex_);
    calls_.push_back({std::string(prev_long), {prev_short.begin(), prev_short.end()}});
    return out;
  }
  std::size_t max_summary_tokens() const override { return max_; }

  struct Call {
    std::string prev_long;
    std::vector<DialogueRound> prev_short;
  };
  std::vector<Call> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  std::size_t max_;
  mutable std::mutex mutex_;
  mutable std::vector<Call> calls_;
};

/// Observer with a fixed probability, or one driven by a keyword in the
/// current round.
class FixedObserver final : public ObserverBackend {
 public:
  explicit FixedObserver(double prob, std::size_t dim = 4, std::string keyword = {})
      : prob_(prob), dim_(dim), keyword_(std::move(keyword)) {}
  std::size_t embed_dim() const override { return dim_; }
  std::vector<double> embed(const ContextualMemory& m) const override {
    std::vector<double> v(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = 0.1 * static_cast<double>(i + m.short_term.size());
    return v;
  }
  double predict(const ContextualMemory& m) const override {
    if (keyword_.empty()) return prob_;
    return m.short_term.back().text.find(keyword_) != std::string::npos ? prob_ : 1.0 - prob_;
  }
  void fit(std::span<const ContextualMemory>, std::span<const ContextualMemory>) override { ++fits; }
  int fits = 0;

 private:
  double prob_;
  std::size_t dim_;
  std::string keyword_;
};

class FixedPresenter final : public PresenterBackend {
 public:
  explicit FixedPresenter(std::string text = "please refocus", std::size_t dim = 2, bool fail = false)
      : text_(std::move(text)), dim_(dim), fail_(fail) {}
  std::size_t embed_dim() const override { return dim_; }
  std::vector<double> embed(const ContextualMemory&) const override {
    return std::vector<double>(dim_, 0.5);
  }
  std::string generate(const ContextualMemory&) const override {
    ++calls;
    if (fail_) throw Error("presenter offline");
    return text_;
  }
  void fit(std::span<const PresenterExample>) override {}
  mutable int calls = 0;

 private:
  std::string text_;
  std::size_t dim_;
  bool fail_;
};

/// Transport answering from a script; records every request.
class ScriptedTransport final : public Transport {
 public:
  void push(int status, std::string body) { script_.push_back({status, std::move(body), {}}); }
  void push_network_error() { script_.push_back({0, {}, "connection refused"}); }
  /// Answers every call with a chat completion whose content is `reply`
  /// once the script is exhausted.
  void set_default_reply(std::string reply) { default_reply_ = std::move(reply); }

  HttpResponse post(const std::string& url, const std::string& body, const Headers& headers) override {
    std::lock_guard lock(mutex_);
    requests.push_back({url, body, headers});
    if (!script_.empty()) {
      auto r = script_.front();
      script_.pop_front();
      return r;
    }
    if (default_reply_) return {200, completion(*default_reply_), {}};
    return {500, "script exhausted", {}};
  }

  static std::string completion(const std::string& content) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
    return j.dump();
  }

  struct Request {
    std::string url;
    std::string body;
    Headers headers;
  };
  std::vector<Request> requests;

 private:
  std::mutex mutex_;
  std::deque<HttpResponse> script_;
  std::optional<std::string> default_reply_;
};

}  // namespace puli::testing
