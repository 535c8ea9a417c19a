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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "puli/learners.hpp"
#include "puli/rng.hpp"

namespace puli {

struct PolicyDims {
  std::size_t observer_dim = 64;   // d_o
  std::size_t presenter_dim = 32;  // d_p
  std::size_t hidden_width = 128;
  std::size_t layers = 6;  // linear layers in the perceptron, output layer included

  bool operator==(const PolicyDims&) const = default;
};

/// Backend embeddings of one memory before projection.
struct RawState {
  std::vector<double> observer;   // d_o
  std::vector<double> presenter;  // d_p
};

inline constexpr double kProbabilityFloor = 1e-7;
inline constexpr double kDecisionThreshold = 0.5;

/// Intervention policy: a learnable projection of the presenter embedding,
/// concatenated with the observer embedding, fed through a ReLU perceptron
/// with a sigmoid output.
///
/// All parameters live in one flat vector: the projection (d_o x d_p,
/// row-major) first, then for each layer its weights (out x in, row-major)
/// followed by its biases.
class CoordinatorPolicy {
 public:
  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every weight and bias.
  CoordinatorPolicy(PolicyDims dims, std::uint64_t seed);

  const PolicyDims& dims() const { return dims_; }
  std::size_t state_dim() const { return 2 * dims_.observer_dim; }

  std::span<const double> parameters() const { return theta_; }
  std::span<double> mutable_parameters() { return theta_; }
  std::size_t parameter_count() const { return theta_.size(); }

  /// S = concat(observer, projection * presenter).
  std::vector<double> state(const RawState& raw) const;

  /// F(S), clamped to [1e-7, 1 - 1e-7].
  double intervention_prob(std::span<const double> state) const;
  double intervention_prob(const RawState& raw) const { return intervention_prob(state(raw)); }

  /// Gradient of log pi(S, a) with respect to every parameter, projection included.
  std::vector<double> log_prob_gradient(const RawState& raw, int action) const;

  void save(std::ostream& out) const;
  static CoordinatorPolicy load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static CoordinatorPolicy load(const std::filesystem::path& path);

  bool operator==(const CoordinatorPolicy& other) const {
    return dims_ == other.dims_ && theta_ == other.theta_;
  }

 private:
  struct Layer {
    std::size_t in, out, weights, biases;  // offsets into theta_
  };
  CoordinatorPolicy() = default;
  void build_layout();
  double output_logit(std::span<const double> state, std::vector<std::vector<double>>* acts) const;

  PolicyDims dims_;
  std::size_t projection_size_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> theta_;
};

/// a * F + (1 - a) * (1 - F).
double policy_prob(const CoordinatorPolicy& policy, std::span<const double> state, int action);

enum class ActMode { kSample, kThreshold };

int sample_action(double intervention_prob, Rng& rng);
int threshold_action(double intervention_prob);
int act(const CoordinatorPolicy& policy, std::span<const double> state, ActMode mode, Rng* rng);

/// Builds the policy input for one memory. Throws InvalidArgument when the
/// backend dimensions do not match the policy.
RawState encode_raw(const ObserverBackend& observer, const PresenterBackend& presenter,
                    const ContextualMemory& memory, const CoordinatorPolicy& policy);
std::vector<double> encode_state(const ObserverBackend& observer, const PresenterBackend& presenter,
                                 const ContextualMemory& memory, const CoordinatorPolicy& policy);

struct TrajectoryStep {
  RawState raw;
  int action = 0;
  double log_prob = 0.0;
};

using Trajectory = std::vector<TrajectoryStep>;

/// Sum over the trajectory of grad log pi(S_n, a_n).
std::vector<double> trajectory_gradient(const CoordinatorPolicy& policy, const Trajectory& trajectory);

/// theta += (eta * r_total) * sum_n grad log pi(S_n, a_n). Returns the applied
/// step. Throws Error (leaving the policy untouched) on a non-finite gradient
/// and InvalidArgument on an empty trajectory or non-finite reward.
std::vector<double> reinforce_update(CoordinatorPolicy& policy, const Trajectory& trajectory,
                                     double r_total, double learning_rate);

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::vector<double> numeric;
};

/// Compares an analytic gradient of log pi(S, a) against central finite
/// differences, parameter by parameter. The relative error of a parameter is
/// |analytic - numeric| / max(|numeric|, 1e-6).
GradcheckResult gradcheck(const CoordinatorPolicy& policy, const RawState& raw, int action,
                          std::span<const double> analytic, double epsilon = 1e-5);
GradcheckResult gradcheck(const CoordinatorPolicy& policy, const RawState& raw, int action,
                          double epsilon = 1e-5);

}  // namespace puli
