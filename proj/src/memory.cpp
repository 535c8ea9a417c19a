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

#include "puli/memory.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "puli/error.hpp"
#include "puli/metrics.hpp"

namespace puli {

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  const auto flush = [&] {
    const auto first = current.find_first_not_of(" \t\r");
    if (first != std::string::npos) {
      const auto last = current.find_last_not_of(" \t\r");
      std::string s = current.substr(first, last - first + 1);
      if (count_tokens(s) > 0) out.push_back(std::move(s));
    }
    current.clear();
  };
  for (char c : text) {
    if (c == '\n') {
      flush();
      continue;
    }
    current.push_back(c);
    if (c == '.' || c == '!' || c == '?') flush();
  }
  flush();
  return out;
}

std::string ExtractiveSummarizer::summarize(const ProjectProposal& proposal,
                                            std::string_view prev_long,
                                            std::span<const DialogueRound> prev_short) const {
  std::vector<std::string> sentences = split_sentences(prev_long);
  for (const auto& r : prev_short) {
    auto more = split_sentences(r.text);
    sentences.insert(sentences.end(), std::make_move_iterator(more.begin()),
                     std::make_move_iterator(more.end()));
  }
  {
    std::unordered_set<std::string> seen;
    std::vector<std::string> unique;
    for (auto& s : sentences) {
      if (seen.insert(s).second) unique.push_back(std::move(s));
    }
    sentences = std::move(unique);
  }

  const auto goal_tokens = tokenize(proposal.goal);
  const std::set<std::string> goal(goal_tokens.begin(), goal_tokens.end());
  std::vector<std::size_t> score(sentences.size()), length(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto toks = tokenize(sentences[i]);
    length[i] = toks.size();
    score[i] = static_cast<std::size_t>(
        std::count_if(toks.begin(), toks.end(), [&](const auto& w) { return goal.contains(w); }));
  }
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  std::vector<bool> keep(sentences.size(), false);
  std::size_t budget = max_tokens_;
  for (auto i : order) {
    if (length[i] <= budget) {
      keep[i] = true;
      budget -= length[i];
    }
  }
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!keep[i]) continue;
    if (!out.empty()) out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

std::span<const DialogueRound> short_term(std::span<const DialogueRound> rounds, std::size_t t) {
  if (t >= rounds.size()) {
    throw InvalidArgument(fmt::format("short_term: step {} out of range for {} rounds", t,
                                      rounds.size()));
  }
  const std::size_t first = t + 1 >= kShortTermWindow ? t + 1 - kShortTermWindow : 0;
  return rounds.subspan(first, t + 1 - first);
}

std::string fold_long_term(const ProjectProposal& proposal, std::span<const DialogueRound> rounds,
                           std::size_t t, std::string_view prev_long, const Summarizer& summarizer) {
  try {
    return summarizer.summarize(proposal, prev_long, short_term(rounds, t - 1));
  } catch (const std::exception& e) {
    throw Error(fmt::format("summarizer failed at step {}: {}", t, e.what()));
  }
}

std::string long_term(const ProjectProposal& proposal, std::span<const DialogueRound> rounds,
                      std::size_t t, const Summarizer& summarizer) {
  if (t >= rounds.size()) {
    throw InvalidArgument(fmt::format("long_term: step {} out of range for {} rounds", t,
                                      rounds.size()));
  }
  std::string summary;
  for (std::size_t step = 1; step <= t; ++step) {
    summary = fold_long_term(proposal, rounds, step, summary, summarizer);
  }
  return summary;
}

ContextualMemory assemble(const ProjectProposal& proposal, std::span<const DialogueRound> rounds,
                          std::size_t t, const Summarizer& summarizer) {
  auto window = short_term(rounds, t);
  return ContextualMemory{std::cref(proposal), {window.begin(), window.end()},
                          long_term(proposal, rounds, t, summarizer)};
}

std::string render(const ContextualMemory& memory) {
  const auto& p = memory.proposal.get();
  std::string out = "[PROPOSAL]\n" + p.goal + "\n" + p.background + "\n" + p.datasets_desc +
                    "\n[LONG-TERM MEMORY]\n" + memory.long_term + "\n[RECENT TURNS]";
  for (const auto& r : memory.short_term) {
    out += "\n" + r.role + ": " + r.text;
  }
  return out;
}

std::string MemoryBuilder::long_term(const RoundRef& ref) const {
  const auto& dialogue = corpus_.dialogues().at(ref.dialogue);
  if (ref.t >= dialogue.rounds.size()) {
    throw InvalidArgument(fmt::format("memory: step {} out of range for dialogue '{}'", ref.t,
                                      dialogue.id));
  }
  {
    std::shared_lock lock(mutex_);
    auto it = folds_.find(ref.dialogue);
    if (it != folds_.end() && ref.t < it->second.size()) return it->second[ref.t];
  }
  std::unique_lock lock(mutex_);
  auto& folds = folds_[ref.dialogue];
  const auto& proposal = corpus_.proposal_of(dialogue);
  if (folds.empty()) folds.emplace_back();
  while (folds.size() <= ref.t) {
    const std::size_t step = folds.size();
    folds.push_back(fold_long_term(proposal, dialogue.rounds, step, folds.back(), summarizer_));
  }
  return folds[ref.t];
}

ContextualMemory MemoryBuilder::memory(const RoundRef& ref) const {
  const auto& dialogue = corpus_.dialogues().at(ref.dialogue);
  auto summary = long_term(ref);
  auto window = short_term(dialogue.rounds, ref.t);
  return ContextualMemory{std::cref(corpus_.proposal_of(dialogue)), {window.begin(), window.end()},
                          std::move(summary)};
}

}  // namespace puli
