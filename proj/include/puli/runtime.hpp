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

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "puli/corpus.hpp"
#include "puli/learners.hpp"
#include "puli/memory.hpp"

namespace puli {

enum class EventKind { kRoundArrived, kDecision, kIntervention, kLatency, kError, kConclusion };

std::string_view to_string(EventKind kind);

struct StreamEvent {
  EventKind kind = EventKind::kRoundArrived;
  std::size_t t = 0;     // step of the incoming round the event belongs to
  std::string role;      // RoundArrived, Intervention
  std::string text;      // RoundArrived, Intervention, Error, Conclusion
  double prob = 0.0;     // Decision
  int action = 0;        // Decision
  double latency_ms = 0.0;
  std::optional<double> rouge1;  // Conclusion, when a golden conclusion exists
  std::optional<double> bleu1;

  nlohmann::ordered_json to_json() const;
  /// One compact JSON object without a trailing newline.
  std::string to_jsonl() const;
};

inline constexpr const char* kAssistantRole = "Assistant";

/// Speech hooks. The session itself is text in, text out.
struct SpeechHooks {
  std::function<std::string(std::string_view audio)> transcribe;   // ASR
  std::function<void(std::string_view text)> speak;                // TTS of interventions
};

/// One live dialogue watched by the observer. Every incoming round gets a
/// threshold decision; on "intervene" the presenter writes a turn that is
/// appended to the history as an assistant round.
class Session {
 public:
  Session(const ProjectProposal& proposal, const ObserverBackend& observer,
          const PresenterBackend& presenter, const Summarizer& summarizer,
          std::string dialogue_id = "live");

  /// Processes the round with the given step. Throws InvalidArgument when
  /// `t` is not the next expected step; backend failures become an Error
  /// event plus a silent decision.
  std::vector<StreamEvent> push_round(std::size_t t, const std::string& role,
                                      const std::string& text);
  std::vector<StreamEvent> push_round(const DialogueRound& round) {
    return push_round(round.t, round.role, round.text);
  }

  /// History with injected assistant turns; `t` is the position in this history.
  const std::vector<DialogueRound>& history() const { return history_; }
  /// Memory used for the decision at history position `index`.
  ContextualMemory memory_at(std::size_t index) const;
  const std::vector<StreamEvent>& events() const { return events_; }

  std::size_t next_step() const { return next_t_; }
  std::size_t presenter_calls() const { return presenter_calls_; }
  std::size_t intervene_decisions() const { return intervene_decisions_; }

  void set_speech_hooks(SpeechHooks hooks) { hooks_ = std::move(hooks); }

 private:
  void append(DialogueRound round);

  const ProjectProposal& proposal_;
  const ObserverBackend& observer_;
  const PresenterBackend& presenter_;
  const Summarizer& summarizer_;
  std::string dialogue_id_;
  std::vector<DialogueRound> history_;
  std::vector<std::string> summaries_;  // long-term summary per history position
  std::vector<StreamEvent> events_;
  std::size_t next_t_ = 0;
  std::size_t presenter_calls_ = 0;
  std::size_t intervene_decisions_ = 0;
  SpeechHooks hooks_;
};

using Concluder =
    std::function<std::string(const ProjectProposal&, std::span<const DialogueRound> transcript)>;

struct ReplayResult {
  std::vector<StreamEvent> events;
  std::vector<DialogueRound> transcript;
  std::size_t interventions = 0;
  std::optional<std::string> conclusion;
  std::optional<double> rouge1;
  std::optional<double> bleu1;
};

/// Streams every round of the dialogue through a fresh session. With a
/// concluder, a conclusion is generated from the augmented transcript and
/// scored against the proposal's golden conclusion when there is one.
ReplayResult replay(const ProjectProposal& proposal, const Dialogue& dialogue,
                    const ObserverBackend& observer, const PresenterBackend& presenter,
                    const Summarizer& summarizer, const Concluder& concluder = {});

}  // namespace puli
