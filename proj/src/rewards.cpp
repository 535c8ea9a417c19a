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

#include "puli/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "puli/error.hpp"

namespace puli {
namespace {

void check_metric(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw InvalidArgument(fmt::format("{} = {} is outside [0, 1]", name, v));
  }
}

}  // namespace

MetricLedger::MetricLedger(double z0, double l0) {
  append_z(z0);
  append_l(l0);
}

double MetricLedger::best_z() const {
  if (z_.empty()) throw Error("metric ledger: no accuracy history");
  return *std::max_element(z_.begin(), z_.end());
}

double MetricLedger::best_l() const {
  if (l_.empty()) throw Error("metric ledger: no ROUGE-1 history");
  return *std::max_element(l_.begin(), l_.end());
}

void MetricLedger::append_z(double z) {
  check_metric(z, "z");
  z_.push_back(z);
}

void MetricLedger::append_l(double l) {
  check_metric(l, "l");
  l_.push_back(l);
}

double r_when(double z_t, MetricLedger& ledger) {
  const double reward = z_t - ledger.best_z();
  ledger.append_z(z_t);
  return reward;
}

double r_how(double l_t, MetricLedger& ledger) {
  const double reward = l_t - ledger.best_l();
  ledger.append_l(l_t);
  return reward;
}

double r_total(double r_when, double r_how, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidArgument(fmt::format("lambda = {} is outside [0, 1]", lambda));
  }
  return lambda * r_when + (1.0 - lambda) * r_how;
}

std::string MetricsLog::format(const EpochMetrics& m) {
  return fmt::format("{}\t{}\t{}\t{}\t{}\t{}", m.epoch, m.z, m.l, m.r_when, m.r_how, m.r_total);
}

EpochMetrics MetricsLog::parse(const std::string& line) {
  std::istringstream in(line);
  EpochMetrics m;
  if (!(in >> m.epoch >> m.z >> m.l >> m.r_when >> m.r_how >> m.r_total)) {
    throw Error("malformed metrics log line: '" + line + "'");
  }
  return m;
}

std::vector<EpochMetrics> MetricsLog::read(std::istream& in) {
  std::vector<EpochMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == kHeader) continue;
    out.push_back(parse(line));
  }
  return out;
}

}  // namespace puli
