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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace puli {

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

enum class IssueType { kScientificError, kLowCollaboration, kScopeDrift, kMissedOpportunity };

std::string_view to_string(IssueType type);
/// Accepts the snake_case names and the spaced forms used in labeling
/// responses ("scope drift"). Returns nullopt for anything outside the set.
std::optional<IssueType> parse_issue_type(std::string_view name);

struct ProjectProposal {
  std::string id;
  std::string goal;
  std::string background;
  std::string datasets_desc;
  std::optional<std::string> golden_conclusion;
  std::vector<std::string> roles;

  bool operator==(const ProjectProposal&) const = default;
};

struct InterventionPayload {
  std::size_t position = 0;
  IssueType issue_type = IssueType::kScopeDrift;
  std::vector<std::string> target_roles;
  std::string content;
  std::optional<std::string> modified_dialog;

  bool operator==(const InterventionPayload&) const = default;
};

enum class LabelKind { kUnlabeled, kPositive, kNegative };

struct RoundLabel {
  LabelKind kind = LabelKind::kUnlabeled;
  std::optional<InterventionPayload> intervention;  // set iff kind == kPositive

  static RoundLabel unlabeled() { return {}; }
  static RoundLabel negative() { return {LabelKind::kNegative, std::nullopt}; }
  static RoundLabel positive(InterventionPayload payload) {
    return {LabelKind::kPositive, std::move(payload)};
  }

  bool operator==(const RoundLabel&) const = default;
};

struct DialogueRound {
  std::string dialogue_id;
  std::size_t t = 0;
  std::string role;
  std::string text;
  RoundLabel label;

  bool operator==(const DialogueRound&) const = default;
};

struct Dialogue {
  std::string id;
  std::string proposal_id;
  Split split = Split::kTrain;
  std::vector<DialogueRound> rounds;

  /// Step indices of rounds carrying the given label.
  std::vector<std::size_t> steps_with(LabelKind kind) const;

  bool operator==(const Dialogue&) const = default;
};

/// Throws CorpusError unless `t` runs 0,1,2,... and every round names this dialogue.
void validate_dialogue(const Dialogue& dialogue);
void validate_proposal(const ProjectProposal& proposal);

/// Immutable set of proposals and dialogues in canonical order: proposals
/// and dialogues sorted by id, rounds by step.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<ProjectProposal> proposals, std::vector<Dialogue> dialogues);

  const std::vector<ProjectProposal>& proposals() const { return proposals_; }
  const std::vector<Dialogue>& dialogues() const { return dialogues_; }

  const ProjectProposal& proposal(std::string_view id) const;
  const ProjectProposal& proposal_of(const Dialogue& dialogue) const {
    return proposal(dialogue.proposal_id);
  }
  /// Index into dialogues(), or nullopt.
  std::optional<std::size_t> find_dialogue(std::string_view id) const;

  bool empty() const { return proposals_.empty() && dialogues_.empty(); }
  bool operator==(const Corpus& other) const {
    return proposals_ == other.proposals_ && dialogues_ == other.dialogues_;
  }

 private:
  std::vector<ProjectProposal> proposals_;
  std::vector<Dialogue> dialogues_;
  std::map<std::string, std::size_t, std::less<>> proposal_index_;
  std::map<std::string, std::size_t, std::less<>> dialogue_index_;
};

inline constexpr std::string_view kCorpusFormat = "puli-corpus";
inline constexpr int kCorpusVersion = 1;

Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// A round addressed by its dialogue's index in Corpus::dialogues() and its step.
struct RoundRef {
  std::size_t dialogue = 0;
  std::size_t t = 0;

  auto operator<=>(const RoundRef&) const = default;
};

struct PUDataset {
  Split split = Split::kTrain;
  std::vector<RoundRef> positives;
  std::vector<RoundRef> unlabeled;  // train only
  std::vector<RoundRef> negatives;  // validation/test only
};

inline constexpr std::size_t kDefaultUnlabeledPerDialogue = 4;

/// Builds the positive-unlabeled view of one split.
///
/// Train dialogues contribute their single positive to P and
/// `k_unlabeled` distinct other rounds, sampled without replacement, to U.
/// Validation and test dialogues contribute one positive and one negative.
PUDataset assemble_pu(const Corpus& corpus, Split split,
                      std::size_t k_unlabeled = kDefaultUnlabeledPerDialogue,
                      std::uint64_t seed = 0);

struct SplitStats {
  std::size_t dialogues = 0;
  std::size_t sampled_rounds = 0;
  std::size_t positive_rounds = 0;
  std::size_t unlabeled_rounds = 0;
  std::size_t negative_rounds = 0;
};

struct StatsReport {
  std::size_t dialogues = 0;
  std::size_t rounds = 0;
  double mean_rounds_per_dialogue = 0.0;
  double mean_tokens_per_round = 0.0;
  SplitStats train, validation, test;
};

StatsReport corpus_stats(const Corpus& corpus,
                         std::size_t k_unlabeled = kDefaultUnlabeledPerDialogue);
std::string format_stats(const StatsReport& report);

}  // namespace puli
