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

#include "puli/remote.hpp"

#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "puli/error.hpp"
#include "puli/forge.hpp"
#include "puli/metrics.hpp"

namespace puli {

namespace {

bool alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

std::string lstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return std::string(s);
}

}  // namespace

std::string truncate_tokens(std::string_view text, std::size_t n) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (alnum(text[i]) && (i == 0 || !alnum(text[i - 1]))) {
      if (seen == n) {
        auto end = i;
        while (end > 0 && !alnum(text[end - 1])) --end;
        return std::string(text.substr(0, end));
      }
      ++seen;
    }
  }
  return std::string(text);
}

LlmSummarizer::LlmSummarizer(GatewayClient& client, PromptTemplate prompt,
                             std::size_t max_summary_tokens)
    : client_(client), prompt_(std::move(prompt)), max_tokens_(max_summary_tokens) {}

std::string LlmSummarizer::summarize(const ProjectProposal& proposal, std::string_view prev_long,
                                     std::span<const DialogueRound> prev_short) const {
  const auto request = make_request(prompt_,
                                    {{"goal", proposal.goal},
                                     {"previous", prev_long.empty() ? "(none)" : std::string(prev_long)},
                                     {"recent", render_history(prev_short)},
                                     {"max_tokens", std::to_string(max_tokens_)}},
                                    client_.config().summarizer_model, 0.0);
  return truncate_tokens(client_.complete(request), max_tokens_);
}

double parse_observer_answer(std::string_view text) {
  const auto s = lstrip(text);
  auto starts = [&](std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    }
    return true;
  };
  if (starts("no need intervention")) return 0.0;
  if (starts("intervention content")) return 1.0;
  throw GatewayError(GatewayErrorKind::kMalformedResponse,
                     "observer answer is neither an intervention nor a pass");
}

RemoteObserver::RemoteObserver(GatewayClient& client, PromptTemplate prompt, std::string examples,
                               std::size_t embed_dim)
    : client_(client), prompt_(std::move(prompt)), examples_(std::move(examples)), dim_(embed_dim) {}

std::vector<double> RemoteObserver::embed(const ContextualMemory& memory) const {
  auto v = client_.embed(render(memory));
  if (v.size() != dim_) {
    throw InvalidArgument(fmt::format("observer embedding has {} dims, expected {}", v.size(), dim_));
  }
  return v;
}

double RemoteObserver::predict(const ContextualMemory& memory) const {
  const auto& current = memory.short_term.back();
  const auto request = make_request(
      prompt_,
      {{"examples", examples_}, {"context", render(memory)}, {"round", std::to_string(current.t)}},
      client_.config().observer_model, 0.0);
  return parse_observer_answer(client_.complete(request));
}

void RemoteObserver::fit(std::span<const ContextualMemory>, std::span<const ContextualMemory>) {
  spdlog::warn("remote observer: fit is not supported, keeping the served model");
}

RemotePresenter::RemotePresenter(GatewayClient& client, PromptTemplate prompt, std::size_t embed_dim)
    : client_(client), prompt_(std::move(prompt)), dim_(embed_dim) {}

std::vector<double> RemotePresenter::embed(const ContextualMemory& memory) const {
  auto v = client_.embed(render(memory));
  if (v.size() != dim_) {
    throw InvalidArgument(fmt::format("presenter embedding has {} dims, expected {}", v.size(), dim_));
  }
  return v;
}

std::string RemotePresenter::generate(const ContextualMemory& memory) const {
  const auto request = make_request(prompt_, {{"context", render(memory)}},
                                    client_.config().presenter_model, client_.config().temperature);
  return client_.complete(request);
}

void RemotePresenter::fit(std::span<const PresenterExample>) {
  spdlog::warn("remote presenter: fit is not supported, keeping the served model");
}

std::string regenerate_conclusion(GatewayClient& client, const PromptTemplate& prompt,
                                  const ProjectProposal& proposal,
                                  std::span<const DialogueRound> transcript) {
  const auto request = make_request(
      prompt, {{"proposal", render_proposal_brief(proposal)}, {"transcript", render_history(transcript)}},
      client.config().summarizer_model, client.config().temperature);
  return client.complete(request);
}

}  // namespace puli
