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

#include "puli/runtime.hpp"

#include <chrono>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "puli/coordinator.hpp"
#include "puli/error.hpp"
#include "puli/metrics.hpp"

namespace puli {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kRoundArrived: return "round_arrived";
    case EventKind::kDecision: return "decision";
    case EventKind::kIntervention: return "intervention";
    case EventKind::kLatency: return "latency";
    case EventKind::kError: return "error";
    case EventKind::kConclusion: return "conclusion";
  }
  return "unknown";
}

nlohmann::ordered_json StreamEvent::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(kind));
  switch (kind) {
    case EventKind::kRoundArrived:
    case EventKind::kIntervention:
      j["t"] = t;
      j["role"] = role;
      j["text"] = text;
      break;
    case EventKind::kDecision:
      j["t"] = t;
      j["prob"] = prob;
      j["action"] = action ? "intervene" : "silent";
      break;
    case EventKind::kLatency:
      j["t"] = t;
      j["ms"] = latency_ms;
      break;
    case EventKind::kError:
      j["t"] = t;
      j["message"] = text;
      break;
    case EventKind::kConclusion:
      j["text"] = text;
      if (rouge1) j["rouge1"] = *rouge1;
      if (bleu1) j["bleu1"] = *bleu1;
      break;
  }
  return j;
}

std::string StreamEvent::to_jsonl() const { return to_json().dump(); }

namespace {

StreamEvent make_event(EventKind kind, std::size_t t, std::string role = {}, std::string text = {}) {
  StreamEvent e;
  e.kind = kind;
  e.t = t;
  e.role = std::move(role);
  e.text = std::move(text);
  return e;
}

}  // namespace

Session::Session(const ProjectProposal& proposal, const ObserverBackend& observer,
                 const PresenterBackend& presenter, const Summarizer& summarizer,
                 std::string dialogue_id)
    : proposal_(proposal),
      observer_(observer),
      presenter_(presenter),
      summarizer_(summarizer),
      dialogue_id_(std::move(dialogue_id)) {}

void Session::append(DialogueRound round) {
  const auto index = history_.size();
  round.dialogue_id = dialogue_id_;
  round.t = index;
  round.label = RoundLabel::unlabeled();
  history_.push_back(std::move(round));
  if (index == 0) {
    summaries_.emplace_back();
    return;
  }
  try {
    summaries_.push_back(
        fold_long_term(proposal_, history_, index, summaries_[index - 1], summarizer_));
  } catch (...) {
    // Keep the history and the summaries aligned before reporting.
    summaries_.push_back(summaries_[index - 1]);
    throw;
  }
}

ContextualMemory Session::memory_at(std::size_t index) const {
  if (index >= history_.size()) {
    throw InvalidArgument(fmt::format("no history entry {}", index));
  }
  const auto window = short_term(history_, index);
  return {proposal_, {window.begin(), window.end()}, summaries_[index]};
}

std::vector<StreamEvent> Session::push_round(std::size_t t, const std::string& role,
                                             const std::string& text) {
  if (t != next_t_) {
    throw InvalidArgument(fmt::format("out-of-order round: expected step {}, got {}", next_t_, t));
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<StreamEvent> out;
  out.push_back(make_event(EventKind::kRoundArrived, t, role, text));

  auto fail = [&](const std::exception& e) {
    spdlog::warn("session {}: backend failure at step {}: {}", dialogue_id_, t, e.what());
    out.push_back(make_event(EventKind::kError, t, {}, e.what()));
  };

  auto decision = make_event(EventKind::kDecision, t);
  std::optional<std::string> intervention;
  try {
    append({dialogue_id_, 0, role, text, {}});
    const auto memory = memory_at(history_.size() - 1);
    decision.prob = observer_.predict(memory);
    if (threshold_action(decision.prob)) {
      ++presenter_calls_;
      intervention = presenter_.generate(memory);
      decision.action = 1;
    }
  } catch (const std::exception& e) {
    fail(e);
    decision.action = 0;
    intervention.reset();
  }
  out.push_back(decision);

  if (intervention) {
    ++intervene_decisions_;
    out.push_back(make_event(EventKind::kIntervention, t, kAssistantRole, *intervention));
    try {
      append({dialogue_id_, 0, kAssistantRole, *intervention, {}});
    } catch (const std::exception& e) {
      fail(e);
    }
    if (hooks_.speak) hooks_.speak(*intervention);
  }

  auto latency = make_event(EventKind::kLatency, t);
  latency.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  out.push_back(std::move(latency));
  ++next_t_;
  events_.insert(events_.end(), out.begin(), out.end());
  return out;
}

ReplayResult replay(const ProjectProposal& proposal, const Dialogue& dialogue,
                    const ObserverBackend& observer, const PresenterBackend& presenter,
                    const Summarizer& summarizer, const Concluder& concluder) {
  Session session(proposal, observer, presenter, summarizer, dialogue.id);
  for (const auto& round : dialogue.rounds) session.push_round(round);
  ReplayResult result;
  result.events = session.events();
  result.transcript = session.history();
  result.interventions = session.intervene_decisions();
  if (concluder) {
    result.conclusion = concluder(proposal, result.transcript);
    auto event = make_event(EventKind::kConclusion, dialogue.rounds.size(), {}, *result.conclusion);
    if (proposal.golden_conclusion && !tokenize(*proposal.golden_conclusion).empty()) {
      result.rouge1 = rouge1(*result.conclusion, *proposal.golden_conclusion);
      result.bleu1 = bleu1(*result.conclusion, *proposal.golden_conclusion);
      event.rouge1 = result.rouge1;
      event.bleu1 = result.bleu1;
    }
    result.events.push_back(std::move(event));
  }
  return result;
}

}  // namespace puli
