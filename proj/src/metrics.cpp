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

#include "puli/metrics.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "puli/error.hpp"

namespace puli {
namespace {

bool is_token_char(unsigned char c) { return c < 0x80 && std::isalnum(c); }

std::unordered_map<std::string_view, std::size_t> counts(std::span<const std::string> tokens) {
  std::unordered_map<std::string_view, std::size_t> out;
  for (const auto& tok : tokens) ++out[tok];
  return out;
}

std::size_t clipped_overlap(std::span<const std::string> candidate,
                            std::span<const std::string> reference) {
  const auto ref_counts = counts(reference);
  std::size_t overlap = 0;
  for (const auto& [tok, n] : counts(candidate)) {
    auto it = ref_counts.find(tok);
    if (it != ref_counts.end()) overlap += std::min(n, it->second);
  }
  return overlap;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool tok = is_token_char(c);
    if (tok && !in_token) ++n;
    in_token = tok;
  }
  return n;
}

double rouge1(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (reference.empty()) throw InvalidArgument("rouge1: empty reference");
  if (candidate.empty()) return 0.0;
  const double overlap = static_cast<double>(clipped_overlap(candidate, reference));
  const double p = overlap / static_cast<double>(candidate.size());
  const double r = overlap / static_cast<double>(reference.size());
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double rouge1(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  return rouge1(c, r);
}

double bleu1(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (reference.empty()) throw InvalidArgument("bleu1: empty reference");
  if (candidate.empty()) return 0.0;
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double precision = static_cast<double>(clipped_overlap(candidate, reference)) / c;
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return precision * bp;
}

double bleu1(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  return bleu1(c, r);
}

ClassifyMetrics classify_metrics(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw InvalidArgument("classify_metrics: length mismatch (" + std::to_string(preds.size()) +
                          " vs " + std::to_string(labels.size()) + ")");
  }
  if (preds.empty()) throw InvalidArgument("classify_metrics: empty input");
  ClassifyMetrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0;
    const bool y = labels[i] != 0;
    if (p && y) ++m.tp;
    else if (p) ++m.fp;
    else if (y) ++m.fn;
    else ++m.tn;
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(m.tp + m.tn, preds.size());
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::map<std::string, double> win_rate(const std::map<std::string, std::size_t>& wins) {
  std::size_t total = 0;
  for (const auto& [_, n] : wins) total += n;
  if (total == 0) throw InvalidArgument("win_rate: no decided comparisons");
  std::map<std::string, double> out;
  for (const auto& [method, n] : wins) {
    out[method] = static_cast<double>(n) / static_cast<double>(total);
  }
  return out;
}

}  // namespace puli
