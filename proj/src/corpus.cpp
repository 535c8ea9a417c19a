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

#include "puli/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <type_traits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "puli/error.hpp"
#include "puli/metrics.hpp"
#include "puli/rng.hpp"

namespace puli {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

std::string_view to_string(IssueType type) {
  switch (type) {
    case IssueType::kScientificError: return "scientific_error";
    case IssueType::kLowCollaboration: return "low_collaboration";
    case IssueType::kScopeDrift: return "scope_drift";
    case IssueType::kMissedOpportunity: return "missed_opportunity";
  }
  return "?";
}

std::optional<IssueType> parse_issue_type(std::string_view name) {
  std::string norm;
  for (char c : name) norm.push_back(c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(c)));
  if (norm == "scientific_error") return IssueType::kScientificError;
  if (norm == "low_collaboration") return IssueType::kLowCollaboration;
  if (norm == "scope_drift" || norm == "scope_drift_from_project_goal") return IssueType::kScopeDrift;
  if (norm == "missed_opportunity") return IssueType::kMissedOpportunity;
  return std::nullopt;
}

std::vector<std::size_t> Dialogue::steps_with(LabelKind kind) const {
  std::vector<std::size_t> out;
  for (const auto& r : rounds) {
    if (r.label.kind == kind) out.push_back(r.t);
  }
  return out;
}

void validate_proposal(const ProjectProposal& p) {
  if (p.id.empty()) throw CorpusError("proposal with empty id");
  if (p.goal.empty()) throw CorpusError("proposal '" + p.id + "' has an empty goal");
  if (p.roles.size() < 2) throw CorpusError("proposal '" + p.id + "' needs at least two roles");
}

void validate_dialogue(const Dialogue& d) {
  if (d.id.empty()) throw CorpusError("dialogue with empty id");
  for (std::size_t i = 0; i < d.rounds.size(); ++i) {
    const auto& r = d.rounds[i];
    if (r.t != i) {
      throw CorpusError(fmt::format("dialogue '{}': non-consecutive step (expected t={}, got t={})",
                                    d.id, i, r.t));
    }
    if (r.dialogue_id != d.id) {
      throw CorpusError(fmt::format("dialogue '{}': round {} names dialogue '{}'", d.id, i,
                                    r.dialogue_id));
    }
    const bool positive = r.label.kind == LabelKind::kPositive;
    if (positive != r.label.intervention.has_value()) {
      throw CorpusError(fmt::format("dialogue '{}': round {} has an intervention payload "
                                    "without a positive label or vice versa", d.id, i));
    }
    if (positive && r.label.intervention->content.empty()) {
      throw CorpusError(fmt::format("dialogue '{}': round {} has empty intervention content", d.id, i));
    }
    if (r.label.kind == LabelKind::kNegative && d.split == Split::kTrain) {
      throw CorpusError(fmt::format("dialogue '{}': negative label in a train dialogue", d.id));
    }
  }
}

Corpus::Corpus(std::vector<ProjectProposal> proposals, std::vector<Dialogue> dialogues)
    : proposals_(std::move(proposals)), dialogues_(std::move(dialogues)) {
  std::sort(proposals_.begin(), proposals_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(dialogues_.begin(), dialogues_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < proposals_.size(); ++i) {
    validate_proposal(proposals_[i]);
    if (!proposal_index_.emplace(proposals_[i].id, i).second) {
      throw CorpusError("duplicate proposal id '" + proposals_[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < dialogues_.size(); ++i) {
    const auto& d = dialogues_[i];
    validate_dialogue(d);
    if (!dialogue_index_.emplace(d.id, i).second) {
      throw CorpusError("duplicate dialogue id '" + d.id + "'");
    }
    if (!proposal_index_.contains(d.proposal_id)) {
      throw CorpusError("dialogue '" + d.id + "' references unknown proposal '" + d.proposal_id + "'");
    }
  }
}

const ProjectProposal& Corpus::proposal(std::string_view id) const {
  auto it = proposal_index_.find(id);
  if (it == proposal_index_.end()) throw CorpusError("unknown proposal '" + std::string(id) + "'");
  return proposals_[it->second];
}

std::optional<std::size_t> Corpus::find_dialogue(std::string_view id) const {
  auto it = dialogue_index_.find(id);
  if (it == dialogue_index_.end()) return std::nullopt;
  return it->second;
}

// --- JSONL encoding -------------------------------------------------------

namespace {

void expect_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                 std::string_view what) {
  if (!j.is_object()) throw CorpusError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw CorpusError(fmt::format("{}: unknown field '{}'", what, key));
    }
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) throw CorpusError(fmt::format("{}: missing field '{}'", what, key));
  if constexpr (std::is_same_v<T, std::size_t>) {
    if (!it->is_number_unsigned()) {
      throw CorpusError(fmt::format("{}: field '{}' must be a non-negative integer", what, key));
    }
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw CorpusError(fmt::format("{}: field '{}' has the wrong type", what, key));
  }
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key, std::string_view what) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key, what);
}

ProjectProposal proposal_from_json(const nlohmann::json& j) {
  expect_keys(j, {"kind", "id", "goal", "background", "datasets_desc", "golden_conclusion", "roles"},
              "proposal");
  ProjectProposal p;
  p.id = field<std::string>(j, "id", "proposal");
  p.goal = field<std::string>(j, "goal", "proposal");
  p.background = field<std::string>(j, "background", "proposal");
  p.datasets_desc = field<std::string>(j, "datasets_desc", "proposal");
  p.golden_conclusion = optional_field<std::string>(j, "golden_conclusion", "proposal");
  p.roles = field<std::vector<std::string>>(j, "roles", "proposal");
  return p;
}

RoundLabel label_from_json(const nlohmann::json& j) {
  expect_keys(j, {"kind", "intervention"}, "label");
  const auto kind = field<std::string>(j, "kind", "label");
  if (kind == "unlabeled") return RoundLabel::unlabeled();
  if (kind == "negative") return RoundLabel::negative();
  if (kind != "positive") throw CorpusError("label: unknown kind '" + kind + "'");
  auto it = j.find("intervention");
  if (it == j.end()) throw CorpusError("label: positive label without intervention");
  const auto& iv = *it;
  expect_keys(iv, {"position", "issue_type", "target_roles", "content", "modified_dialog"},
              "intervention");
  InterventionPayload payload;
  payload.position = field<std::size_t>(iv, "position", "intervention");
  const auto issue = field<std::string>(iv, "issue_type", "intervention");
  auto parsed = parse_issue_type(issue);
  if (!parsed || to_string(*parsed) != issue) {
    throw CorpusError("intervention: unknown issue_type '" + issue + "'");
  }
  payload.issue_type = *parsed;
  payload.target_roles = field<std::vector<std::string>>(iv, "target_roles", "intervention");
  payload.content = field<std::string>(iv, "content", "intervention");
  payload.modified_dialog = optional_field<std::string>(iv, "modified_dialog", "intervention");
  return RoundLabel::positive(std::move(payload));
}

Dialogue dialogue_from_json(const nlohmann::json& j) {
  expect_keys(j, {"kind", "id", "proposal_id", "split", "rounds"}, "dialogue");
  Dialogue d;
  d.id = field<std::string>(j, "id", "dialogue");
  d.proposal_id = field<std::string>(j, "proposal_id", "dialogue");
  try {
    d.split = parse_split(field<std::string>(j, "split", "dialogue"));
  } catch (const InvalidArgument& e) {
    throw CorpusError(std::string("dialogue: ") + e.what());
  }
  const auto it = j.find("rounds");
  if (it == j.end() || !it->is_array()) throw CorpusError("dialogue: 'rounds' must be an array");
  for (const auto& rj : *it) {
    expect_keys(rj, {"dialogue_id", "t", "role", "text", "label"}, "round");
    DialogueRound r;
    r.dialogue_id = field<std::string>(rj, "dialogue_id", "round");
    r.t = field<std::size_t>(rj, "t", "round");
    r.role = field<std::string>(rj, "role", "round");
    r.text = field<std::string>(rj, "text", "round");
    auto lj = rj.find("label");
    if (lj == rj.end()) throw CorpusError("round: missing field 'label'");
    r.label = label_from_json(*lj);
    d.rounds.push_back(std::move(r));
  }
  return d;
}

ojson to_json(const ProjectProposal& p) {
  ojson j;
  j["kind"] = "proposal";
  j["id"] = p.id;
  j["goal"] = p.goal;
  j["background"] = p.background;
  j["datasets_desc"] = p.datasets_desc;
  if (p.golden_conclusion) j["golden_conclusion"] = *p.golden_conclusion;
  j["roles"] = p.roles;
  return j;
}

ojson to_json(const RoundLabel& label) {
  ojson j;
  switch (label.kind) {
    case LabelKind::kUnlabeled: j["kind"] = "unlabeled"; break;
    case LabelKind::kNegative: j["kind"] = "negative"; break;
    case LabelKind::kPositive: {
      j["kind"] = "positive";
      const auto& p = *label.intervention;
      ojson iv;
      iv["position"] = p.position;
      iv["issue_type"] = to_string(p.issue_type);
      iv["target_roles"] = p.target_roles;
      iv["content"] = p.content;
      if (p.modified_dialog) iv["modified_dialog"] = *p.modified_dialog;
      j["intervention"] = std::move(iv);
      break;
    }
  }
  return j;
}

ojson to_json(const Dialogue& d) {
  ojson j;
  j["kind"] = "dialogue";
  j["id"] = d.id;
  j["proposal_id"] = d.proposal_id;
  j["split"] = to_string(d.split);
  ojson rounds = ojson::array();
  for (const auto& r : d.rounds) {
    ojson rj;
    rj["dialogue_id"] = r.dialogue_id;
    rj["t"] = r.t;
    rj["role"] = r.role;
    rj["text"] = r.text;
    rj["label"] = to_json(r.label);
    rounds.push_back(std::move(rj));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

}  // namespace

Corpus read_corpus(std::istream& in) {
  std::vector<ProjectProposal> proposals;
  std::vector<Dialogue> dialogues;
  std::map<std::string, std::size_t> proposal_lines, dialogue_lines;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(std::string("malformed record: ") + e.what(), line_no);
    }
    try {
      if (!saw_header) {
        if (!j.is_object() || j.value("format", "") != kCorpusFormat) {
          throw CorpusError("missing corpus header {\"format\":\"puli-corpus\",\"version\":1}");
        }
        if (j.value("version", 0) != kCorpusVersion) {
          throw CorpusError("unsupported corpus version " + j.value("version", nlohmann::json()).dump());
        }
        saw_header = true;
        continue;
      }
      if (!j.is_object()) throw CorpusError("malformed record: not an object");
      const auto kind = j.value("kind", "");
      if (kind == "proposal") {
        auto p = proposal_from_json(j);
        validate_proposal(p);
        if (!proposal_lines.emplace(p.id, line_no).second) {
          throw CorpusError("duplicate proposal id '" + p.id + "'");
        }
        proposals.push_back(std::move(p));
      } else if (kind == "dialogue") {
        auto d = dialogue_from_json(j);
        validate_dialogue(d);
        if (!dialogue_lines.emplace(d.id, line_no).second) {
          throw CorpusError("duplicate dialogue id '" + d.id + "'");
        }
        dialogues.push_back(std::move(d));
      } else {
        throw CorpusError("malformed record: unknown kind '" + kind + "'");
      }
    } catch (const CorpusError& e) {
      if (e.line() != 0) throw;
      throw CorpusError(e.what(), line_no);
    }
  }
  for (const auto& d : dialogues) {
    if (!proposal_lines.contains(d.proposal_id)) {
      throw CorpusError("dialogue '" + d.id + "' references unknown proposal '" + d.proposal_id + "'",
                        dialogue_lines.at(d.id));
    }
  }
  return Corpus(std::move(proposals), std::move(dialogues));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file '" + path.string() + "'");
  return read_corpus(in);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  ojson header;
  header["format"] = kCorpusFormat;
  header["version"] = kCorpusVersion;
  out << header.dump() << '\n';
  for (const auto& p : corpus.proposals()) out << to_json(p).dump() << '\n';
  for (const auto& d : corpus.dialogues()) out << to_json(d).dump() << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file '" + path.string() + "'");
  write_corpus(corpus, out);
  if (!out) throw CorpusError("write failed for '" + path.string() + "'");
}

// --- PU assembly ----------------------------------------------------------

PUDataset assemble_pu(const Corpus& corpus, Split split, std::size_t k_unlabeled,
                      std::uint64_t seed) {
  PUDataset out;
  out.split = split;
  const auto& dialogues = corpus.dialogues();
  for (std::size_t di = 0; di < dialogues.size(); ++di) {
    const auto& d = dialogues[di];
    if (d.split != split) continue;
    const auto positives = d.steps_with(LabelKind::kPositive);
    if (positives.size() != 1) {
      throw InvalidArgument(fmt::format("assemble_pu: dialogue '{}' has {} positive rounds, expected 1",
                                        d.id, positives.size()));
    }
    out.positives.push_back({di, positives.front()});
    if (split == Split::kTrain) {
      std::vector<std::size_t> candidates;
      for (const auto& r : d.rounds) {
        if (r.t != positives.front()) candidates.push_back(r.t);
      }
      if (candidates.size() < k_unlabeled) {
        throw InvalidArgument(fmt::format(
            "assemble_pu: dialogue '{}' has {} non-positive rounds, cannot sample {} unlabeled", d.id,
            candidates.size(), k_unlabeled));
      }
      Rng rng(Rng::derive(seed, di));
      // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
      for (std::size_t i = 0; i < k_unlabeled; ++i) {
        std::swap(candidates[i], candidates[i + rng.uniform_index(candidates.size() - i)]);
      }
      std::vector<std::size_t> picked(candidates.begin(), candidates.begin() + k_unlabeled);
      std::sort(picked.begin(), picked.end());
      for (auto t : picked) out.unlabeled.push_back({di, t});
    } else {
      const auto negatives = d.steps_with(LabelKind::kNegative);
      if (negatives.size() != 1) {
        throw InvalidArgument(fmt::format(
            "assemble_pu: {} dialogue '{}' has {} negative rounds, expected 1", to_string(split), d.id,
            negatives.size()));
      }
      out.negatives.push_back({di, negatives.front()});
    }
  }
  return out;
}

StatsReport corpus_stats(const Corpus& corpus, std::size_t k_unlabeled) {
  StatsReport s;
  std::size_t tokens = 0;
  for (const auto& d : corpus.dialogues()) {
    ++s.dialogues;
    s.rounds += d.rounds.size();
    SplitStats& split = d.split == Split::kTrain        ? s.train
                        : d.split == Split::kValidation ? s.validation
                                                        : s.test;
    ++split.dialogues;
    std::size_t pos = 0, neg = 0;
    for (const auto& r : d.rounds) {
      tokens += count_tokens(r.text);
      if (r.label.kind == LabelKind::kPositive) ++pos;
      if (r.label.kind == LabelKind::kNegative) ++neg;
    }
    split.positive_rounds += pos;
    split.negative_rounds += neg;
    if (d.split == Split::kTrain) {
      const std::size_t available = d.rounds.size() - std::min<std::size_t>(pos, d.rounds.size());
      split.unlabeled_rounds += std::min(k_unlabeled, available);
    }
  }
  for (SplitStats* split : {&s.train, &s.validation, &s.test}) {
    split->sampled_rounds = split->positive_rounds + split->unlabeled_rounds + split->negative_rounds;
  }
  if (s.dialogues) s.mean_rounds_per_dialogue = static_cast<double>(s.rounds) / s.dialogues;
  if (s.rounds) s.mean_tokens_per_round = static_cast<double>(tokens) / s.rounds;
  return s;
}

std::string format_stats(const StatsReport& s) {
  const auto dash = [](std::size_t n) { return n ? fmt::format("{}", n) : std::string("-"); };
  std::ostringstream out;
  out << fmt::format("{:<28}{}\n", "# Dialogues", s.dialogues);
  out << fmt::format("{:<28}{:.2f}\n", "# Avg. Rounds per Dialogue", s.mean_rounds_per_dialogue);
  out << fmt::format("{:<28}{:.2f}\n", "# Avg. Tokens per Round", s.mean_tokens_per_round);
  out << fmt::format("{:<28}{:>12}{:>12}{:>12}\n", "", "Train", "Validation", "Test");
  const auto row = [&](const char* name, auto get) {
    out << fmt::format("{:<28}{:>12}{:>12}{:>12}\n", name, dash(get(s.train)),
                       dash(get(s.validation)), dash(get(s.test)));
  };
  row("# Dialogues", [](const SplitStats& x) { return x.dialogues; });
  row("# Sampled Rounds", [](const SplitStats& x) { return x.sampled_rounds; });
  row("# Positive Rounds", [](const SplitStats& x) { return x.positive_rounds; });
  row("# Unlabeled Rounds", [](const SplitStats& x) { return x.unlabeled_rounds; });
  row("# Negative Rounds", [](const SplitStats& x) { return x.negative_rounds; });
  return out.str();
}

}  // namespace puli
