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

#include "puli/prompt.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "puli/error.hpp"

#ifndef PULI_PROMPTS_DIR
#define PULI_PROMPTS_DIR "prompts"
#endif

namespace puli {

namespace {

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";

bool valid_slot_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

// Calls on_text for literal runs and on_slot for each placeholder name.
template <typename Text, typename Slot>
void scan(std::string_view text, Text on_text, Slot on_slot) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find(kOpen, pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) break;
    const auto name = text.substr(open + kOpen.size(), close - open - kOpen.size());
    if (!valid_slot_name(name)) {
      on_text(text.substr(pos, open + kOpen.size() - pos));
      pos = open + kOpen.size();
      continue;
    }
    on_text(text.substr(pos, open - pos));
    on_slot(name);
    pos = close + kClose.size();
  }
  on_text(text.substr(pos));
}

}  // namespace

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> names;
  scan(
      text, [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      });
  return names;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  scan(
      text, [&](std::string_view literal) { out.append(literal); },
      [&](std::string_view name) {
        auto it = values.find(std::string(name));
        if (it == values.end()) throw InvalidArgument(fmt::format("no value for slot '{}'", name));
        out.append(it->second);
      });
  return out;
}

PromptTemplate::PromptTemplate(std::string name, std::string system, std::string user,
                               std::vector<std::string> slots)
    : name_(std::move(name)), system_(std::move(system)), user_(std::move(user)),
      slots_(std::move(slots)) {
  validate();
}

void PromptTemplate::validate() const {
  std::set<std::string> used;
  for (auto& s : placeholders(system_)) used.insert(s);
  for (auto& s : placeholders(user_)) used.insert(s);
  const std::set<std::string> declared(slots_.begin(), slots_.end());
  for (const auto& s : declared) {
    if (!used.contains(s)) {
      throw ConfigError(fmt::format("prompt '{}': declared slot '{}' never appears", name_, s));
    }
  }
  for (const auto& s : used) {
    if (!declared.contains(s)) {
      throw ConfigError(fmt::format("prompt '{}': undeclared slot '{}'", name_, s));
    }
  }
}

PromptTemplate PromptTemplate::parse(std::string name, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> slots;
  std::string system, user;
  std::string* section = nullptr;
  bool first = true;
  bool saw_system = false, saw_user = false;
  while (std::getline(in, line)) {
    if (first && line.starts_with("#slots")) {
      std::istringstream words(line.substr(6));
      for (std::string w; words >> w;) slots.push_back(w);
      first = false;
      continue;
    }
    first = false;
    if (line == "[system]") {
      section = &system;
      saw_system = true;
      continue;
    }
    if (line == "[user]") {
      section = &user;
      saw_user = true;
      continue;
    }
    if (!section) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ConfigError(fmt::format("prompt '{}': text before the first section", name));
    }
    *section += line;
    *section += '\n';
  }
  while (!system.empty() && system.back() == '\n') system.pop_back();
  while (!user.empty() && user.back() == '\n') user.pop_back();
  if (!saw_system || !saw_user) {
    throw ConfigError(fmt::format("prompt '{}': needs [system] and [user] sections", name));
  }
  return PromptTemplate(std::move(name), std::move(system), std::move(user), std::move(slots));
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open prompt file {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(path.stem().string(), buf.str());
}

std::string PromptTemplate::render_system(const std::map<std::string, std::string>& values) const {
  for (const auto& [k, v] : values) {
    if (std::find(slots_.begin(), slots_.end(), k) == slots_.end()) {
      throw InvalidArgument(fmt::format("prompt '{}': unknown slot '{}'", name_, k));
    }
  }
  return substitute(system_, values);
}

std::string PromptTemplate::render_user(const std::map<std::string, std::string>& values) const {
  for (const auto& [k, v] : values) {
    if (std::find(slots_.begin(), slots_.end(), k) == slots_.end()) {
      throw InvalidArgument(fmt::format("prompt '{}': unknown slot '{}'", name_, k));
    }
  }
  return substitute(user_, values);
}

std::filesystem::path default_prompts_dir() {
  if (const char* env = std::getenv("PULI_PROMPTS_DIR"); env && *env) return env;
  return PULI_PROMPTS_DIR;
}

}  // namespace puli
