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

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace puli {

using TokenSeq = std::vector<std::string>;

/// Lowercases ASCII letters and splits on runs of non-alphanumeric bytes.
/// Bytes outside ASCII count as separators. Never yields empty tokens.
TokenSeq tokenize(std::string_view text);

std::size_t count_tokens(std::string_view text);

/// Unigram F1 with clipped overlap. Throws InvalidArgument on an empty reference.
double rouge1(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge1(std::string_view candidate, std::string_view reference);

/// Clipped unigram precision times the brevity penalty.
/// An empty candidate scores 0; an empty reference throws.
double bleu1(std::span<const std::string> candidate, std::span<const std::string> reference);
double bleu1(std::string_view candidate, std::string_view reference);

struct ClassifyMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Binary confusion-matrix metrics; any nonzero value counts as positive.
/// Precision and recall are 0 when their denominator is 0.
ClassifyMetrics classify_metrics(std::span<const int> preds, std::span<const int> labels);

/// Share of wins per method. Throws InvalidArgument when the total is zero.
std::map<std::string, double> win_rate(const std::map<std::string, std::size_t>& wins);

}  // namespace puli
