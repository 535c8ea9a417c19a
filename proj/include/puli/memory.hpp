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
#include <map>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "puli/corpus.hpp"

namespace puli {

/// The proposal, the last (up to) three rounds, and the running summary of
/// everything before them.
struct ContextualMemory {
  std::reference_wrapper<const ProjectProposal> proposal;
  std::vector<DialogueRound> short_term;
  std::string long_term;

  bool operator==(const ContextualMemory& other) const {
    return proposal.get() == other.proposal.get() && short_term == other.short_term &&
           long_term == other.long_term;
  }
};

inline constexpr std::size_t kShortTermWindow = 3;
inline constexpr std::size_t kDefaultMaxSummaryTokens = 256;

/// Compresses the previous summary plus the previous short-term window into
/// a new summary of at most max_summary_tokens() tokens. Implementations
/// must be safe to call concurrently.
class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string summarize(const ProjectProposal& proposal, std::string_view prev_long,
                                std::span<const DialogueRound> prev_short) const = 0;
  virtual std::size_t max_summary_tokens() const = 0;
};

/// Keeps the sentences with the highest unigram overlap with the proposal
/// goal until the token cap is reached; kept sentences stay in input order.
class ExtractiveSummarizer final : public Summarizer {
 public:
  explicit ExtractiveSummarizer(std::size_t max_summary_tokens = kDefaultMaxSummaryTokens)
      : max_tokens_(max_summary_tokens) {}

  std::string summarize(const ProjectProposal& proposal, std::string_view prev_long,
                        std::span<const DialogueRound> prev_short) const override;
  std::size_t max_summary_tokens() const override { return max_tokens_; }

 private:
  std::size_t max_tokens_;
};

/// Splits on '.', '!', '?' and newlines; trims; drops token-free pieces.
std::vector<std::string> split_sentences(std::string_view text);

/// Rounds max(0, t-2) .. t. Throws InvalidArgument when t is out of range.
std::span<const DialogueRound> short_term(std::span<const DialogueRound> rounds, std::size_t t);

/// Long-term summary at step t, folded from step 0. Empty at t = 0.
std::string long_term(const ProjectProposal& proposal, std::span<const DialogueRound> rounds,
                      std::size_t t, const Summarizer& summarizer);

/// One fold step: the summary at t from the summary at t-1 (t >= 1).
std::string fold_long_term(const ProjectProposal& proposal, std::span<const DialogueRound> rounds,
                           std::size_t t, std::string_view prev_long, const Summarizer& summarizer);

ContextualMemory assemble(const ProjectProposal& proposal, std::span<const DialogueRound> rounds,
                          std::size_t t, const Summarizer& summarizer);

/// Prompt rendering of a memory; the layout is stable and line-oriented.
std::string render(const ContextualMemory& memory);

/// Memory assembly over a corpus with a per-dialogue memo of the long-term fold.
/// Safe for concurrent callers.
class MemoryBuilder {
 public:
  MemoryBuilder(const Corpus& corpus, const Summarizer& summarizer)
      : corpus_(corpus), summarizer_(summarizer) {}

  ContextualMemory memory(const RoundRef& ref) const;
  std::string long_term(const RoundRef& ref) const;

  const Corpus& corpus() const { return corpus_; }
  const Summarizer& summarizer() const { return summarizer_; }

 private:
  const Corpus& corpus_;
  const Summarizer& summarizer_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::size_t, std::vector<std::string>> folds_;
};

}  // namespace puli
