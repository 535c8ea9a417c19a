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

#include <iosfwd>
#include <string>
#include <vector>

namespace puli {

inline constexpr double kDefaultLambda = 0.6;

/// Per-epoch validation metrics: observer accuracy (z) and presenter ROUGE-1 (l).
/// Index 0 holds the pretraining values.
class MetricLedger {
 public:
  MetricLedger() = default;
  MetricLedger(double z0, double l0);

  const std::vector<double>& z_history() const { return z_; }
  const std::vector<double>& l_history() const { return l_; }
  bool initialized() const { return !z_.empty() && !l_.empty(); }

  /// Best value so far; throws Error on an empty history.
  double best_z() const;
  double best_l() const;

  void append_z(double z);
  void append_l(double l);

 private:
  std::vector<double> z_;
  std::vector<double> l_;
};

/// z_T minus the best earlier accuracy, then records z_T.
double r_when(double z_t, MetricLedger& ledger);
/// l_T minus the best earlier ROUGE-1, then records l_T.
double r_how(double l_t, MetricLedger& ledger);
/// lambda * r_when + (1 - lambda) * r_how; lambda must lie in [0, 1].
double r_total(double r_when, double r_how, double lambda = kDefaultLambda);

struct EpochMetrics {
  std::size_t epoch = 0;
  double z = 0.0;
  double l = 0.0;
  double r_when = 0.0;
  double r_how = 0.0;
  double r_total = 0.0;
};

/// Append-only metrics log, one tab-separated line per epoch.
class MetricsLog {
 public:
  static constexpr const char* kHeader = "T\tz\tl\tr_when\tr_how\tr_total";

  static std::string format(const EpochMetrics& m);
  static EpochMetrics parse(const std::string& line);
  static std::vector<EpochMetrics> read(std::istream& in);
};

}  // namespace puli
