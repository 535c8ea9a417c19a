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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace puli {

/// A chat prompt with {{slot}} placeholders.
///
/// File layout: an optional first line `#slots a b c` declaring the slots,
/// then a `[system]` section and a `[user]` section. Every declared slot must
/// occur in the text and every occurring slot must be declared.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string name, std::string system, std::string user,
                 std::vector<std::string> slots);

  static PromptTemplate parse(std::string name, std::string_view text);
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::string& system() const { return system_; }
  const std::string& user() const { return user_; }
  const std::vector<std::string>& slots() const { return slots_; }

  /// Substitutes every slot. Throws InvalidArgument when a slot has no
  /// value or a value names an undeclared slot.
  std::string render_system(const std::map<std::string, std::string>& values) const;
  std::string render_user(const std::map<std::string, std::string>& values) const;

 private:
  void validate() const;

  std::string name_;
  std::string system_;
  std::string user_;
  std::vector<std::string> slots_;
};

/// Names of the {{slot}} placeholders in order of first appearance.
std::vector<std::string> placeholders(std::string_view text);

/// Replaces {{slot}} occurrences; unknown slots throw InvalidArgument.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& values);

/// Directory holding the bundled prompt files.
std::filesystem::path default_prompts_dir();

}  // namespace puli
