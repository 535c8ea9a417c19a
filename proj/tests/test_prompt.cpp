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

#include <gtest/gtest.h>

#include <filesystem>

#include "puli/error.hpp"
#include "puli/prompt.hpp"

using namespace puli;

TEST(Placeholders, FirstAppearanceOrder) {
  EXPECT_EQ(placeholders("{{b}} then {{a}} and {{b}} again"), (std::vector<std::string>{"b", "a"}));
  EXPECT_TRUE(placeholders("no slots { here }").empty());
}

TEST(Substitute, ReplacesEveryOccurrence) {
  EXPECT_EQ(substitute("{{x}}-{{y}}-{{x}}", {{"x", "1"}, {"y", "2"}}), "1-2-1");
  // Values are not re-scanned.
  EXPECT_EQ(substitute("{{x}}", {{"x", "{{y}}"}}), "{{y}}");
  EXPECT_THROW(substitute("{{x}}", {}), InvalidArgument);
}

TEST(PromptTemplate, ParseSectionsAndSlots) {
  const auto p = PromptTemplate::parse("t", "#slots goal name\n[system]\nYou help {{name}}.\n[user]\nGoal: {{goal}}\n");
  EXPECT_EQ(p.slots(), (std::vector<std::string>{"goal", "name"}));
  EXPECT_EQ(p.render_system({{"goal", "g"}, {"name", "Ann"}}), "You help Ann.");
  EXPECT_EQ(p.render_user({{"goal", "g"}, {"name", "Ann"}}), "Goal: g");
}

TEST(PromptTemplate, SlotValidation) {
  // Declared but unused.
  EXPECT_THROW(PromptTemplate::parse("t", "#slots a b\n[system]\n{{a}}\n[user]\nx\n"), Error);
  // Used but undeclared.
  EXPECT_THROW(PromptTemplate::parse("t", "#slots a\n[system]\n{{a}}\n[user]\n{{c}}\n"), Error);
  const auto p = PromptTemplate::parse("t", "#slots a\n[system]\n{{a}}\n[user]\nx\n");
  EXPECT_THROW(p.render_system({}), InvalidArgument);
  EXPECT_THROW(p.render_system({{"a", "1"}, {"zzz", "2"}}), InvalidArgument);
}

TEST(PromptTemplate, BundledPromptsLoad) {
  const auto dir = default_prompts_dir();
  ASSERT_TRUE(std::filesystem::is_directory(dir));
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    const auto p = PromptTemplate::load(entry.path());
    EXPECT_FALSE(p.system().empty()) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 10u);
  const auto judge = PromptTemplate::load(dir / "judge.txt");
  EXPECT_EQ(judge.slots(), (std::vector<std::string>{"golden", "candidates", "letters"}));
  EXPECT_NE(judge.system().find("Example Output: B"), std::string::npos);
}
