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

#include <span>
#include <string>
#include <vector>

#include "puli/gateway.hpp"
#include "puli/learners.hpp"
#include "puli/memory.hpp"
#include "puli/prompt.hpp"

namespace puli {

/// Cuts text right after its n-th token (metrics tokenizer); shorter text is returned whole.
std::string truncate_tokens(std::string_view text, std::size_t n);

/// Summarizer backed by a chat model. Output is truncated to the token cap.
class LlmSummarizer final : public Summarizer {
 public:
  LlmSummarizer(GatewayClient& client, PromptTemplate prompt,
                std::size_t max_summary_tokens = kDefaultMaxSummaryTokens);

  std::string summarize(const ProjectProposal& proposal, std::string_view prev_long,
                        std::span<const DialogueRound> prev_short) const override;
  std::size_t max_summary_tokens() const override { return max_tokens_; }

 private:
  GatewayClient& client_;
  PromptTemplate prompt_;
  std::size_t max_tokens_;
};

/// Observer served by a remote model: predict is a chat call answering in
/// the "Intervention Content" / "No Need Intervention" format, embed goes
/// through the embeddings endpoint, fit only logs a warning.
class RemoteObserver final : public ObserverBackend {
 public:
  RemoteObserver(GatewayClient& client, PromptTemplate prompt, std::string examples,
                 std::size_t embed_dim);

  std::size_t embed_dim() const override { return dim_; }
  std::vector<double> embed(const ContextualMemory& memory) const override;
  double predict(const ContextualMemory& memory) const override;
  void fit(std::span<const ContextualMemory> positives,
           std::span<const ContextualMemory> negatives) override;

 private:
  GatewayClient& client_;
  PromptTemplate prompt_;
  std::string examples_;
  std::size_t dim_;
};

/// 1 for "Intervention Content...", 0 for "No Need Intervention"; throws otherwise.
double parse_observer_answer(std::string_view text);

class RemotePresenter final : public PresenterBackend {
 public:
  RemotePresenter(GatewayClient& client, PromptTemplate prompt, std::size_t embed_dim);

  std::size_t embed_dim() const override { return dim_; }
  std::vector<double> embed(const ContextualMemory& memory) const override;
  std::string generate(const ContextualMemory& memory) const override;
  void fit(std::span<const PresenterExample> positives) override;

 private:
  GatewayClient& client_;
  PromptTemplate prompt_;
  std::size_t dim_;
};

/// Asks the model for the team's conclusion given the full (possibly
/// intervention-augmented) transcript.
std::string regenerate_conclusion(GatewayClient& client, const PromptTemplate& prompt,
                                  const ProjectProposal& proposal,
                                  std::span<const DialogueRound> transcript);

}  // namespace puli
