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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "puli/corpus.hpp"
#include "puli/gateway.hpp"
#include "puli/prompt.hpp"

namespace puli {

/// Vocabularies bundled with the synthetic generator.
const std::vector<std::string>& default_on_topic_vocab();
const std::vector<std::string>& default_drift_vocab();
const std::vector<std::string>& default_roles();

struct SynthConfig {
  std::size_t n_dialogues = 200;
  std::size_t rounds_per_dialogue = 20;
  std::size_t tokens_per_round = 24;
  std::vector<std::string> on_topic_vocab = default_on_topic_vocab();
  std::vector<std::string> drift_vocab = default_drift_vocab();
  std::vector<std::string> roles = default_roles();
  std::size_t drift_lo = 2;
  std::size_t drift_hi = 17;
  /// Share of drift tokens in a drift round; the rest stays on topic.
  double drift_mix = 0.8;
  /// Extra unlabeled drift rounds per dialogue (anywhere outside the labeled one).
  std::size_t hidden_drift_per_dialogue = 0;
  std::size_t dialogues_per_proposal = 1;
  std::size_t validation_count = 0;
  std::size_t test_count = 0;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on overlapping vocabularies, a bad drift range, or
/// impossible counts.
void validate(const SynthConfig& config);

struct SynthCorpus {
  Corpus corpus;
  /// Every planted drift round, labeled or hidden, sorted.
  std::set<RoundRef> drift_rounds;
};

/// Dialogues of on-topic rounds with one labeled drift round each, plus
/// optional unlabeled drift rounds. Validation and test dialogues also get
/// one on-topic negative. Pure function of the config.
SynthCorpus synthesize(const SynthConfig& config);
Corpus synth_corpus(const SynthConfig& config);

struct ForgePrompts {
  PromptTemplate proposal_extraction;
  std::map<std::string, PromptTemplate> role_templates;  // role name -> template
  PromptTemplate positive_labeling;
  PromptTemplate negative_selection;

  /// Loads the bundled file set: proposal_extraction.txt, role_<name>.txt,
  /// positive_labeling.txt and negative_selection.txt.
  static ForgePrompts load(const std::filesystem::path& dir);
  /// Checks that every template declares the slots the forge fills.
  void validate() const;
};

struct PaperText {
  std::string id;
  std::string text;
  std::optional<std::string> golden_conclusion;
};

struct LlmForgeConfig {
  std::size_t rounds_per_dialogue = 20;
  std::size_t dialogues_per_paper = 1;  // at most 5
  double validation_fraction = 0.075;
  double test_fraction = 0.075;
  std::size_t parallel_papers = 4;
  std::uint64_t seed = 0;
};

/// Sections of a proposal-extraction response.
ProjectProposal parse_proposal_response(const std::string& id, const std::string& text,
                                        std::vector<std::string> roles);
/// The labeling response as a payload, or nullopt when it does not parse
/// into the closed schema or points outside the dialogue.
std::optional<InterventionPayload> parse_labeling_response(const std::string& text,
                                                           std::size_t n_rounds);
/// Round picked by the negative-selection response, or nullopt.
std::optional<std::size_t> parse_negative_response(const std::string& text, std::size_t n_rounds,
                                                   std::size_t positive);

std::string render_proposal_brief(const ProjectProposal& proposal);
std::string render_history(std::span<const DialogueRound> rounds);

/// Builds a corpus from paper texts through the gateway: proposal
/// extraction, role-play with a uniformly sampled speaker per turn, one
/// positive label, and for held-out dialogues one negative. Dialogues whose
/// labels fail to parse are dropped with a warning.
Corpus llm_forge(std::span<const PaperText> papers, const ForgePrompts& prompts,
                 GatewayClient& gateway, const LlmForgeConfig& config);

}  // namespace puli
