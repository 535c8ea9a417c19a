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

#include "puli/forge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "puli/error.hpp"
#include "puli/metrics.hpp"
#include "puli/rng.hpp"

namespace puli {

const std::vector<std::string>& default_on_topic_vocab() {
  static const std::vector<std::string> vocab = {
      "kinase",      "inhibitor",   "receptor",    "binding",     "assay",       "tumor",
      "xenograft",   "apoptosis",   "pathway",     "ligand",      "agonist",     "antagonist",
      "dose",        "toxicity",    "plasma",      "clearance",   "metabolite",  "cytochrome",
      "selectivity", "potency",     "scaffold",    "analog",      "synthesis",   "solubility",
      "permeability", "bioavailability", "transcriptome", "proteomics", "genomic", "mutation",
      "expression",  "biomarker",   "cohort",      "patient",     "trial",       "endpoint",
      "placebo",     "efficacy",    "safety",      "phenotype",   "knockout",    "mouse",
      "cell",        "culture",     "lysate",      "western",     "blot",        "sequencing",
      "rna",         "protein",     "enzyme",      "substrate",   "affinity",    "docking",
      "structure",   "crystal",     "mechanism",   "signaling",   "inflammation", "cytokine",
      "antibody",    "epitope",     "vaccine",     "immune",      "macrophage",  "lymphocyte",
      "metastasis",  "proliferation", "resistance", "combination", "regimen",    "pharmacokinetics",
      "hepatic",     "renal",       "cardiac",     "neuronal",    "glucose",     "insulin",
      "lipid",       "mitochondrial"};
  return vocab;
}

const std::vector<std::string>& default_drift_vocab() {
  static const std::vector<std::string> vocab = {
      "parking",   "cafeteria", "weekend",   "holiday",   "football",  "movie",
      "vacation",  "traffic",   "weather",   "restaurant", "concert",  "recipe",
      "laptop",    "furniture", "birthday",  "gardening", "podcast",   "fashion",
      "shopping",  "airline",   "hotel",     "beach",     "mountain",  "hiking",
      "painting",  "guitar",    "novel",     "election",  "stadium",   "basketball",
      "coffee",    "pizza",     "sandwich",  "bakery",    "tennis",    "marathon",
      "museum",    "theater",   "camping",   "fishing",   "skiing",    "cycling",
      "smartphone", "gaming",   "streaming", "television", "celebrity", "wedding",
      "apartment", "rent",      "mortgage",  "taxes",     "insurance", "commute",
      "bicycle",   "garage",    "kitchen",   "dessert",   "chocolate", "festival",
      "karaoke",   "lottery",   "souvenir",  "cruise",    "zoo",       "aquarium",
      "yoga",      "gym",       "sneakers",  "jacket",    "umbrella",  "picnic",
      "barbecue",  "bowling",   "arcade",    "puzzle",    "crossword", "chess",
      "magazine",  "newspaper"};
  return vocab;
}

const std::vector<std::string>& default_roles() {
  static const std::vector<std::string> roles = {"Pharmacologist", "Medicinal Chemist",
                                                 "Bioinformatician", "Clinical Physician"};
  return roles;
}

void validate(const SynthConfig& c) {
  if (c.on_topic_vocab.empty() || c.drift_vocab.empty()) {
    throw ConfigError("synth: vocabularies must be non-empty");
  }
  const std::unordered_set<std::string> on(c.on_topic_vocab.begin(), c.on_topic_vocab.end());
  for (const auto& w : c.drift_vocab) {
    if (on.contains(w)) throw ConfigError(fmt::format("synth: '{}' is in both vocabularies", w));
  }
  for (const auto* vocab : {&c.on_topic_vocab, &c.drift_vocab}) {
    for (const auto& w : *vocab) {
      const auto toks = tokenize(w);
      if (toks.size() != 1 || toks.front() != w) {
        throw ConfigError(fmt::format("synth: vocabulary entry '{}' is not a single token", w));
      }
    }
  }
  if (c.roles.size() < 2) throw ConfigError("synth: at least two roles are needed");
  if (c.rounds_per_dialogue == 0) throw ConfigError("synth: rounds_per_dialogue must be positive");
  if (c.drift_lo > c.drift_hi || c.drift_hi >= c.rounds_per_dialogue) {
    throw ConfigError(fmt::format("synth: drift range [{}, {}] outside 0..{}", c.drift_lo,
                                  c.drift_hi, c.rounds_per_dialogue - 1));
  }
  if (c.tokens_per_round == 0) throw ConfigError("synth: tokens_per_round must be positive");
  if (!(c.drift_mix >= 0.0 && c.drift_mix <= 1.0)) {
    throw ConfigError("synth: drift_mix must lie in [0, 1]");
  }
  if (c.dialogues_per_proposal == 0) throw ConfigError("synth: dialogues_per_proposal must be positive");
  if (c.validation_count + c.test_count > c.n_dialogues) {
    throw ConfigError("synth: more held-out dialogues than dialogues");
  }
  // Held-out dialogues need one on-topic round left for their negative.
  const std::size_t needed = 1 + c.hidden_drift_per_dialogue +
                             (c.validation_count + c.test_count > 0 ? 1 : 0);
  if (needed > c.rounds_per_dialogue) {
    throw ConfigError("synth: too many drift rounds for the dialogue length");
  }
}

namespace {

constexpr std::uint64_t kProposalStream = 1ULL << 32;
constexpr std::uint64_t kDialogueStream = 2ULL << 32;
constexpr std::uint64_t kSplitStream = 3ULL << 32;
constexpr std::size_t kWordsPerSentence = 8;
constexpr double kGoalTokenShare = 0.25;

std::string sentences(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += (i % kWordsPerSentence == 0) ? ". " : " ";
    out += words[i];
  }
  out += '.';
  return out;
}

std::vector<std::string> distinct_sample(const std::vector<std::string>& vocab, std::size_t n,
                                         Rng& rng) {
  std::vector<std::size_t> idx(vocab.size());
  std::iota(idx.begin(), idx.end(), 0);
  n = std::min(n, idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[idx[i]]);
  return out;
}

struct ProposalPlan {
  ProjectProposal proposal;
  std::vector<std::string> goal_tokens;
};

ProposalPlan make_proposal(const SynthConfig& c, std::size_t index) {
  Rng rng(Rng::derive(c.seed, kProposalStream + index));
  ProposalPlan plan;
  plan.goal_tokens = distinct_sample(c.on_topic_vocab, 6, rng);
  const auto& g = plan.goal_tokens;
  auto& p = plan.proposal;
  p.id = fmt::format("p{:05d}", index);
  p.goal = fmt::format("Establish how {} {} modulates {} {} through {} {}.", g[0 % g.size()],
                       g[1 % g.size()], g[2 % g.size()], g[3 % g.size()], g[4 % g.size()],
                       g[5 % g.size()]);
  std::vector<std::string> bg;
  for (int i = 0; i < 12; ++i) bg.push_back(c.on_topic_vocab[rng.uniform_index(c.on_topic_vocab.size())]);
  p.background = "Background: " + sentences(bg);
  std::vector<std::string> ds;
  for (int i = 0; i < 6; ++i) ds.push_back(c.on_topic_vocab[rng.uniform_index(c.on_topic_vocab.size())]);
  p.datasets_desc = "Datasets: " + sentences(ds);
  p.golden_conclusion = fmt::format(
      "The team concluded that {} {} modulates {} {} through {} {}, supported by {} {} evidence.",
      g[0 % g.size()], g[1 % g.size()], g[2 % g.size()], g[3 % g.size()], g[4 % g.size()],
      g[5 % g.size()], bg[0], bg[1]);
  p.roles = c.roles;
  return plan;
}

std::string on_topic_text(const SynthConfig& c, const std::vector<std::string>& goal, Rng& rng) {
  std::vector<std::string> words;
  words.reserve(c.tokens_per_round);
  for (std::size_t i = 0; i < c.tokens_per_round; ++i) {
    if (rng.uniform01() < kGoalTokenShare) {
      words.push_back(goal[rng.uniform_index(goal.size())]);
    } else {
      words.push_back(c.on_topic_vocab[rng.uniform_index(c.on_topic_vocab.size())]);
    }
  }
  return sentences(words);
}

struct DriftText {
  std::string text;
  std::vector<std::string> drift_words;  // in order of appearance
};

DriftText drift_text(const SynthConfig& c, Rng& rng) {
  const auto n = c.tokens_per_round;
  const auto n_drift = static_cast<std::size_t>(std::lround(c.drift_mix * static_cast<double>(n)));
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n_drift; ++i) {
    words.push_back(c.drift_vocab[rng.uniform_index(c.drift_vocab.size())]);
  }
  for (std::size_t i = n_drift; i < n; ++i) {
    words.push_back(c.on_topic_vocab[rng.uniform_index(c.on_topic_vocab.size())]);
  }
  rng.shuffle(std::span(words));
  DriftText out;
  const std::unordered_set<std::string> drift(c.drift_vocab.begin(), c.drift_vocab.end());
  for (const auto& w : words) {
    if (drift.contains(w) &&
        std::find(out.drift_words.begin(), out.drift_words.end(), w) == out.drift_words.end()) {
      out.drift_words.push_back(w);
    }
  }
  out.text = sentences(words);
  return out;
}

InterventionPayload drift_payload(std::size_t t, const std::string& role, const DriftText& drift,
                                  const ProposalPlan& plan) {
  InterventionPayload payload;
  payload.position = t;
  payload.issue_type = IssueType::kScopeDrift;
  payload.target_roles = {role};
  std::vector<std::string> topics(drift.drift_words.begin(),
                                  drift.drift_words.begin() +
                                      static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, drift.drift_words.size())));
  const auto& g = plan.goal_tokens;
  payload.content = fmt::format(
      "The discussion has drifted toward {}. Let us return to the project goal on {} {} and {} {} "
      "and agree on the next experiment.",
      topics.empty() ? std::string("unrelated topics") : fmt::format("{}", fmt::join(topics, ", ")),
      g[0 % g.size()], g[1 % g.size()], g[2 % g.size()], g[3 % g.size()]);
  payload.modified_dialog = fmt::format("Building on the goal, we should test how {} {} affects {} {}.",
                                        g[0 % g.size()], g[1 % g.size()], g[2 % g.size()],
                                        g[3 % g.size()]);
  return payload;
}

}  // namespace

SynthCorpus synthesize(const SynthConfig& c) {
  validate(c);
  const std::size_t n_proposals = (c.n_dialogues + c.dialogues_per_proposal - 1) / c.dialogues_per_proposal;
  std::vector<ProposalPlan> plans;
  plans.reserve(n_proposals);
  for (std::size_t i = 0; i < n_proposals; ++i) plans.push_back(make_proposal(c, i));

  std::vector<Split> splits(c.n_dialogues, Split::kTrain);
  {
    std::vector<std::size_t> order(c.n_dialogues);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::derive(c.seed, kSplitStream));
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < c.validation_count; ++i) splits[order[i]] = Split::kValidation;
    for (std::size_t i = 0; i < c.test_count; ++i) splits[order[c.validation_count + i]] = Split::kTest;
  }

  SynthCorpus out;
  std::vector<Dialogue> dialogues;
  dialogues.reserve(c.n_dialogues);
  std::vector<std::pair<std::size_t, std::size_t>> drift_refs;  // (dialogue index, t)
  for (std::size_t i = 0; i < c.n_dialogues; ++i) {
    const auto& plan = plans[i / c.dialogues_per_proposal];
    Rng rng(Rng::derive(c.seed, kDialogueStream + i));
    Dialogue d;
    d.id = fmt::format("d{:05d}", i);
    d.proposal_id = plan.proposal.id;
    d.split = splits[i];

    const std::size_t positive = c.drift_lo + rng.uniform_index(c.drift_hi - c.drift_lo + 1);
    std::vector<std::size_t> others;
    for (std::size_t t = 0; t < c.rounds_per_dialogue; ++t) {
      if (t != positive) others.push_back(t);
    }
    rng.shuffle(std::span(others));
    const std::set<std::size_t> hidden(others.begin(),
                                       others.begin() + static_cast<std::ptrdiff_t>(c.hidden_drift_per_dialogue));
    std::optional<std::size_t> negative;
    if (d.split != Split::kTrain) negative = others[c.hidden_drift_per_dialogue];

    for (std::size_t t = 0; t < c.rounds_per_dialogue; ++t) {
      DialogueRound r;
      r.dialogue_id = d.id;
      r.t = t;
      r.role = c.roles[rng.uniform_index(c.roles.size())];
      if (t == positive || hidden.contains(t)) {
        auto drift = drift_text(c, rng);
        r.text = drift.text;
        if (t == positive) r.label = RoundLabel::positive(drift_payload(t, r.role, drift, plan));
        drift_refs.emplace_back(i, t);
      } else {
        r.text = on_topic_text(c, plan.goal_tokens, rng);
        if (negative && *negative == t) r.label = RoundLabel::negative();
      }
      d.rounds.push_back(std::move(r));
    }
    dialogues.push_back(std::move(d));
  }

  std::vector<ProjectProposal> proposals;
  for (auto& plan : plans) proposals.push_back(plan.proposal);
  out.corpus = Corpus(std::move(proposals), std::move(dialogues));
  // Ids are zero-padded, so corpus order equals generation order.
  for (const auto& [d, t] : drift_refs) out.drift_rounds.insert(RoundRef{d, t});
  return out;
}

Corpus synth_corpus(const SynthConfig& config) { return synthesize(config).corpus; }

// ---------------------------------------------------------------------------
// LLM-backed forge

ForgePrompts ForgePrompts::load(const std::filesystem::path& dir) {
  ForgePrompts p;
  p.proposal_extraction = PromptTemplate::load(dir / "proposal_extraction.txt");
  p.positive_labeling = PromptTemplate::load(dir / "positive_labeling.txt");
  p.negative_selection = PromptTemplate::load(dir / "negative_selection.txt");
  for (const auto& role : default_roles()) {
    std::string file = "role_";
    for (char ch : role) file += ch == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    p.role_templates.emplace(role, PromptTemplate::load(dir / (file + ".txt")));
  }
  p.validate();
  return p;
}

void ForgePrompts::validate() const {
  auto require = [](const PromptTemplate& t, std::initializer_list<const char*> slots) {
    for (const char* s : slots) {
      if (std::find(t.slots().begin(), t.slots().end(), s) == t.slots().end()) {
        throw ConfigError(fmt::format("prompt '{}' must declare slot '{}'", t.name(), s));
      }
    }
  };
  require(proposal_extraction, {"paper"});
  require(positive_labeling, {"proposal", "history"});
  require(negative_selection, {"proposal", "history", "positive"});
  if (role_templates.size() < 2) throw ConfigError("forge needs at least two role templates");
  for (const auto& [role, t] : role_templates) require(t, {"proposal", "history"});
}

std::string render_proposal_brief(const ProjectProposal& p) {
  return fmt::format("Goal: {}\nBackground: {}\nDatasets: {}", p.goal, p.background, p.datasets_desc);
}

std::string render_history(std::span<const DialogueRound> rounds) {
  if (rounds.empty()) return "(no turns yet)";
  std::string out;
  for (const auto& r : rounds) {
    if (!out.empty()) out += '\n';
    out += fmt::format("[{}] {}: {}", r.t, r.role, r.text);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_key(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == ' ' || c == '-') {
      out += '_';
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

std::optional<nlohmann::json> extract_json_object(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(text.substr(open, close - open + 1));
    if (!j.is_object()) return std::nullopt;
    return j;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::optional<std::size_t> as_index(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i < 0) return std::nullopt;
    return static_cast<std::size_t>(i);
  }
  if (v.is_string()) {
    const auto s = trim(v.get<std::string>());
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    return static_cast<std::size_t>(std::stoull(s));
  }
  return std::nullopt;
}

}  // namespace

ProjectProposal parse_proposal_response(const std::string& id, const std::string& text,
                                        std::vector<std::string> roles) {
  ProjectProposal p;
  p.id = id;
  p.roles = std::move(roles);
  std::string* current = nullptr;
  std::vector<std::string> loose;
  bool any_label = false;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::string_view view = line;
    while (!view.empty() && (view.front() == '#' || view.front() == '*' || view.front() == ' ')) {
      view.remove_prefix(1);
    }
    const auto head = upper(view.substr(0, 12));
    std::size_t skip = 0;
    if (head.starts_with("GOAL:")) {
      current = &p.goal, skip = 5;
    } else if (head.starts_with("BACKGROUND:")) {
      current = &p.background, skip = 11;
    } else if (head.starts_with("DATASETS:")) {
      current = &p.datasets_desc, skip = 9;
    }
    if (skip) {
      any_label = true;
      view.remove_prefix(skip);
      while (!view.empty() && (view.front() == '*' || view.front() == ' ')) view.remove_prefix(1);
    }
    const auto piece = trim(view);
    if (!current) {
      if (!piece.empty()) loose.push_back(piece);
      continue;
    }
    if (piece.empty()) continue;
    if (!current->empty()) *current += '\n';
    *current += piece;
  }
  if (!any_label || p.goal.empty()) {
    // No usable structure: first line is the goal, the rest background.
    std::vector<std::string> lines;
    std::istringstream again(text);
    for (std::string line; std::getline(again, line);) {
      if (auto t = trim(line); !t.empty()) lines.push_back(t);
    }
    if (lines.empty()) throw Error(fmt::format("proposal extraction for '{}' returned no text", id));
    p.goal = lines.front();
    p.background.clear();
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (i > 1) p.background += '\n';
      p.background += lines[i];
    }
  }
  return p;
}

std::optional<InterventionPayload> parse_labeling_response(const std::string& text,
                                                           std::size_t n_rounds) {
  auto j = extract_json_object(text);
  if (!j) return std::nullopt;
  std::map<std::string, nlohmann::json> fields;
  for (auto it = j->begin(); it != j->end(); ++it) fields[normalize_key(it.key())] = it.value();
  auto get = [&](std::initializer_list<const char*> names) -> const nlohmann::json* {
    for (const char* n : names) {
      if (auto it = fields.find(n); it != fields.end()) return &it->second;
    }
    return nullptr;
  };

  InterventionPayload payload;
  const auto* pos = get({"intervention_position", "position"});
  if (!pos) return std::nullopt;
  const auto index = as_index(*pos);
  if (!index || *index >= n_rounds) return std::nullopt;
  payload.position = *index;

  const auto* issue = get({"issue_type", "issue"});
  if (!issue || !issue->is_string()) return std::nullopt;
  const auto type = parse_issue_type(trim(issue->get<std::string>()));
  if (!type) return std::nullopt;
  payload.issue_type = *type;

  if (const auto* targets = get({"target_members", "target_roles", "targets"})) {
    if (targets->is_string()) {
      payload.target_roles.push_back(trim(targets->get<std::string>()));
    } else if (targets->is_array()) {
      for (const auto& t : *targets) {
        if (!t.is_string()) return std::nullopt;
        payload.target_roles.push_back(trim(t.get<std::string>()));
      }
    } else {
      return std::nullopt;
    }
  }

  const auto* content = get({"intervention_content", "content"});
  if (!content || !content->is_string()) return std::nullopt;
  payload.content = trim(content->get<std::string>());
  if (payload.content.empty()) return std::nullopt;

  if (const auto* modified = get({"modified_dialog", "modified_dialogue"})) {
    if (modified->is_string() && !trim(modified->get<std::string>()).empty()) {
      payload.modified_dialog = trim(modified->get<std::string>());
    }
  }
  return payload;
}

std::optional<std::size_t> parse_negative_response(const std::string& text, std::size_t n_rounds,
                                                   std::size_t positive) {
  std::optional<std::size_t> pick;
  if (auto j = extract_json_object(text)) {
    for (auto it = j->begin(); it != j->end(); ++it) {
      const auto key = normalize_key(it.key());
      if (key == "round" || key == "position" || key == "negative_round") {
        pick = as_index(it.value());
        break;
      }
    }
  } else {
    const auto digit = text.find_first_of("0123456789");
    if (digit != std::string::npos) {
      const auto end = text.find_first_not_of("0123456789", digit);
      pick = static_cast<std::size_t>(std::stoull(text.substr(digit, end - digit)));
    }
  }
  if (!pick || *pick >= n_rounds || *pick == positive) return std::nullopt;
  return pick;
}

namespace {

struct PaperResult {
  std::optional<ProjectProposal> proposal;
  std::vector<Dialogue> dialogues;
};

std::vector<std::string> forge_roles(const ForgePrompts& prompts) {
  std::vector<std::string> roles;
  for (const auto& r : default_roles()) {
    if (prompts.role_templates.contains(r)) roles.push_back(r);
  }
  for (const auto& [r, t] : prompts.role_templates) {
    if (std::find(roles.begin(), roles.end(), r) == roles.end()) roles.push_back(r);
  }
  return roles;
}

std::string strip_speaker_echo(std::string text, const std::string& role) {
  text = trim(text);
  const auto prefix = role + ":";
  if (text.starts_with(prefix)) text = trim(std::string_view(text).substr(prefix.size()));
  return text;
}

PaperResult forge_paper(const PaperText& paper, std::size_t paper_index, Split split,
                        const ForgePrompts& prompts, GatewayClient& gateway,
                        const LlmForgeConfig& config) {
  const auto& gc = gateway.config();
  const auto roles = forge_roles(prompts);
  PaperResult result;
  auto proposal = parse_proposal_response(
      paper.id,
      gateway.complete(make_request(prompts.proposal_extraction, {{"paper", paper.text}},
                                    gc.forge_model, gc.temperature)),
      roles);
  proposal.golden_conclusion = paper.golden_conclusion;
  validate_proposal(proposal);
  const auto brief = render_proposal_brief(proposal);

  for (std::size_t k = 0; k < config.dialogues_per_paper; ++k) {
    Rng rng(Rng::derive(config.seed, paper_index * 8 + k));
    Dialogue d;
    d.id = config.dialogues_per_paper == 1 ? paper.id : fmt::format("{}-{}", paper.id, k);
    d.proposal_id = proposal.id;
    d.split = split;
    for (std::size_t t = 0; t < config.rounds_per_dialogue; ++t) {
      const auto& role = roles[rng.uniform_index(roles.size())];
      const auto& prompt = prompts.role_templates.at(role);
      auto text = gateway.complete(make_request(
          prompt, {{"proposal", brief}, {"history", render_history(d.rounds)}}, gc.forge_model,
          gc.temperature));
      d.rounds.push_back({d.id, t, role, strip_speaker_echo(std::move(text), role), {}});
    }
    const auto history = render_history(d.rounds);
    const auto labeling = gateway.complete(make_request(
        prompts.positive_labeling, {{"proposal", brief}, {"history", history}}, gc.forge_model,
        gc.temperature));
    auto payload = parse_labeling_response(labeling, d.rounds.size());
    if (!payload) {
      spdlog::warn("forge: dropping dialogue {}: labeling response did not parse", d.id);
      continue;
    }
    const auto positive = payload->position;
    d.rounds[positive].label = RoundLabel::positive(std::move(*payload));
    if (split != Split::kTrain) {
      const auto response = gateway.complete(make_request(
          prompts.negative_selection,
          {{"proposal", brief}, {"history", history}, {"positive", std::to_string(positive)}},
          gc.forge_model, gc.temperature));
      const auto negative = parse_negative_response(response, d.rounds.size(), positive);
      if (!negative) {
        spdlog::warn("forge: dropping dialogue {}: negative selection did not parse", d.id);
        continue;
      }
      d.rounds[*negative].label = RoundLabel::negative();
    }
    result.dialogues.push_back(std::move(d));
  }
  if (!result.dialogues.empty()) result.proposal = std::move(proposal);
  return result;
}

}  // namespace

Corpus llm_forge(std::span<const PaperText> papers, const ForgePrompts& prompts,
                 GatewayClient& gateway, const LlmForgeConfig& config) {
  if (papers.empty()) throw InvalidArgument("llm_forge needs at least one paper");
  if (config.dialogues_per_paper == 0 || config.dialogues_per_paper > 5) {
    throw ConfigError("dialogues_per_paper must lie in 1..5");
  }
  if (config.rounds_per_dialogue < 2) throw ConfigError("rounds_per_dialogue must be at least 2");
  prompts.validate();

  const auto n = papers.size();
  std::vector<Split> splits(n, Split::kTrain);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::derive(config.seed, kSplitStream));
    rng.shuffle(std::span(order));
    const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * n + 0.5));
    const auto n_test = std::min(n - std::min(n, n_val),
                                 static_cast<std::size_t>(std::floor(config.test_fraction * n + 0.5)));
    for (std::size_t i = 0; i < std::min(n, n_val); ++i) splits[order[i]] = Split::kValidation;
    for (std::size_t i = 0; i < n_test; ++i) splits[order[n_val + i]] = Split::kTest;
  }

  std::vector<PaperResult> results(n);
  const auto width = std::max<std::size_t>(1, config.parallel_papers);
  for (std::size_t start = 0; start < n; start += width) {
    std::vector<std::future<PaperResult>> batch;
    for (std::size_t i = start; i < std::min(n, start + width); ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        return forge_paper(papers[i], i, splits[i], prompts, gateway, config);
      }));
    }
    for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
  }

  std::vector<ProjectProposal> proposals;
  std::vector<Dialogue> dialogues;
  for (auto& r : results) {
    if (r.proposal) proposals.push_back(std::move(*r.proposal));
    for (auto& d : r.dialogues) dialogues.push_back(std::move(d));
  }
  return Corpus(std::move(proposals), std::move(dialogues));
}

}  // namespace puli
