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

#include "puli/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "puli/error.hpp"

namespace puli {

CoordinatorPolicy::CoordinatorPolicy(PolicyDims dims, std::uint64_t seed) : dims_(dims) {
  if (dims_.observer_dim == 0 || dims_.presenter_dim == 0 || dims_.hidden_width == 0 ||
      dims_.layers == 0) {
    throw InvalidArgument("CoordinatorPolicy: every dimension must be positive");
  }
  build_layout();
  Rng rng(Rng::derive(seed, 0xc00d));
  const auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) theta_[offset + i] = (2.0 * rng.uniform01() - 1.0) * bound;
  };
  fill(0, projection_size_, dims_.presenter_dim);
  for (const auto& layer : layers_) {
    fill(layer.weights, layer.in * layer.out, layer.in);
    fill(layer.biases, layer.out, layer.in);
  }
}

void CoordinatorPolicy::build_layout() {
  projection_size_ = dims_.observer_dim * dims_.presenter_dim;
  std::size_t offset = projection_size_;
  layers_.clear();
  std::size_t in = 2 * dims_.observer_dim;
  for (std::size_t l = 0; l < dims_.layers; ++l) {
    const std::size_t out = l + 1 == dims_.layers ? 1 : dims_.hidden_width;
    Layer layer{in, out, offset, offset + in * out};
    offset = layer.biases + out;
    layers_.push_back(layer);
    in = out;
  }
  theta_.assign(offset, 0.0);
}

std::vector<double> CoordinatorPolicy::state(const RawState& raw) const {
  if (raw.observer.size() != dims_.observer_dim || raw.presenter.size() != dims_.presenter_dim) {
    throw InvalidArgument(fmt::format(
        "state: expected embeddings of size {} and {}, got {} and {}", dims_.observer_dim,
        dims_.presenter_dim, raw.observer.size(), raw.presenter.size()));
  }
  std::vector<double> s(state_dim(), 0.0);
  std::copy(raw.observer.begin(), raw.observer.end(), s.begin());
  for (std::size_t r = 0; r < dims_.observer_dim; ++r) {
    double acc = 0.0;
    const double* row = &theta_[r * dims_.presenter_dim];
    for (std::size_t c = 0; c < dims_.presenter_dim; ++c) acc += row[c] * raw.presenter[c];
    s[dims_.observer_dim + r] = acc;
  }
  return s;
}

double CoordinatorPolicy::output_logit(std::span<const double> state,
                                       std::vector<std::vector<double>>* acts) const {
  if (state.size() != state_dim()) {
    throw InvalidArgument(fmt::format("policy: state has size {}, expected {}", state.size(),
                                      state_dim()));
  }
  std::vector<double> x(state.begin(), state.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    std::vector<double> y(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = &theta_[layer.weights + o * layer.in];
      double acc = theta_[layer.biases + o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
    if (l + 1 < layers_.size()) {
      for (auto& v : y) v = std::max(v, 0.0);
    }
    if (acts) acts->push_back(std::move(x));
    x = std::move(y);
  }
  return x[0];
}

double CoordinatorPolicy::intervention_prob(std::span<const double> state) const {
  const double f = 1.0 / (1.0 + std::exp(-output_logit(state, nullptr)));
  return std::clamp(f, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

std::vector<double> CoordinatorPolicy::log_prob_gradient(const RawState& raw, int action) const {
  const auto s = state(raw);
  std::vector<std::vector<double>> acts;
  const double f = 1.0 / (1.0 + std::exp(-output_logit(s, &acts)));
  std::vector<double> grad(theta_.size(), 0.0);
  // The clamp is flat outside [floor, 1 - floor].
  if (f < kProbabilityFloor || f > 1.0 - kProbabilityFloor) return grad;

  std::vector<double> delta{action != 0 ? 1.0 - f : -f};
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const auto& input = acts[l];
    std::vector<double> d_input(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      grad[layer.biases + o] += d;
      double* gw = &grad[layer.weights + o * layer.in];
      const double* w = &theta_[layer.weights + o * layer.in];
      for (std::size_t i = 0; i < layer.in; ++i) {
        gw[i] += d * input[i];
        d_input[i] += d * w[i];
      }
    }
    if (l > 0) {
      // Input of layer l is the ReLU output of layer l-1.
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (input[i] <= 0.0) d_input[i] = 0.0;
      }
    }
    delta = std::move(d_input);
  }
  // delta now holds d log pi / dS; the second half flows into the projection.
  for (std::size_t r = 0; r < dims_.observer_dim; ++r) {
    const double d = delta[dims_.observer_dim + r];
    for (std::size_t c = 0; c < dims_.presenter_dim; ++c) {
      grad[r * dims_.presenter_dim + c] = d * raw.presenter[c];
    }
  }
  return grad;
}

void CoordinatorPolicy::save(std::ostream& out) const {
  out << "puli-policy 1\n";
  out << "observer_dim " << dims_.observer_dim << "\n";
  out << "presenter_dim " << dims_.presenter_dim << "\n";
  out << "hidden_width " << dims_.hidden_width << "\n";
  out << "layers " << dims_.layers << "\n";
  out << "parameters " << theta_.size() << "\n";
  for (double v : theta_) out << fmt::format("{}\n", v);
}

CoordinatorPolicy CoordinatorPolicy::load(std::istream& in) {
  const auto fail = [](const std::string& what) -> CoordinatorPolicy {
    throw Error("policy checkpoint: " + what);
  };
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "puli-policy" || version != 1) return fail("missing 'puli-policy 1' header");
  CoordinatorPolicy p;
  const auto read_field = [&](const char* name, std::size_t& value) {
    std::string key;
    if (!(in >> key >> value) || key != name) fail(std::string("expected field '") + name + "'");
  };
  read_field("observer_dim", p.dims_.observer_dim);
  read_field("presenter_dim", p.dims_.presenter_dim);
  read_field("hidden_width", p.dims_.hidden_width);
  read_field("layers", p.dims_.layers);
  std::size_t count = 0;
  read_field("parameters", count);
  if (p.dims_.observer_dim == 0 || p.dims_.presenter_dim == 0 || p.dims_.hidden_width == 0 ||
      p.dims_.layers == 0) {
    fail("zero dimension");
  }
  p.build_layout();
  if (count != p.theta_.size()) {
    fail(fmt::format("parameter count {} does not match dims ({})", count, p.theta_.size()));
  }
  std::string token;
  for (auto& v : p.theta_) {
    if (!(in >> token)) fail("truncated parameter list");
    char* end = nullptr;
    v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') fail("bad parameter value '" + token + "'");
  }
  return p;
}

void CoordinatorPolicy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write policy checkpoint '" + path.string() + "'");
  save(out);
}

CoordinatorPolicy CoordinatorPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open policy checkpoint '" + path.string() + "'");
  return load(in);
}

double policy_prob(const CoordinatorPolicy& policy, std::span<const double> state, int action) {
  const double f = policy.intervention_prob(state);
  const double a = action != 0 ? 1.0 : 0.0;
  return a * f + (1.0 - a) * (1.0 - f);
}

int sample_action(double intervention_prob, Rng& rng) {
  return rng.bernoulli(intervention_prob) ? 1 : 0;
}

int threshold_action(double intervention_prob) {
  return intervention_prob >= kDecisionThreshold ? 1 : 0;
}

int act(const CoordinatorPolicy& policy, std::span<const double> state, ActMode mode, Rng* rng) {
  const double f = policy.intervention_prob(state);
  if (mode == ActMode::kThreshold) return threshold_action(f);
  if (rng == nullptr) throw InvalidArgument("act: sample mode needs a generator");
  return sample_action(f, *rng);
}

RawState encode_raw(const ObserverBackend& observer, const PresenterBackend& presenter,
                    const ContextualMemory& memory, const CoordinatorPolicy& policy) {
  if (observer.embed_dim() != policy.dims().observer_dim ||
      presenter.embed_dim() != policy.dims().presenter_dim) {
    throw InvalidArgument(fmt::format(
        "encode_state: backend dims ({}, {}) do not match policy dims ({}, {})",
        observer.embed_dim(), presenter.embed_dim(), policy.dims().observer_dim,
        policy.dims().presenter_dim));
  }
  RawState raw{observer.embed(memory), presenter.embed(memory)};
  if (raw.observer.size() != observer.embed_dim() || raw.presenter.size() != presenter.embed_dim()) {
    throw InvalidArgument("encode_state: backend returned an embedding of the wrong size");
  }
  return raw;
}

std::vector<double> encode_state(const ObserverBackend& observer, const PresenterBackend& presenter,
                                 const ContextualMemory& memory, const CoordinatorPolicy& policy) {
  return policy.state(encode_raw(observer, presenter, memory, policy));
}

std::vector<double> trajectory_gradient(const CoordinatorPolicy& policy,
                                        const Trajectory& trajectory) {
  std::vector<double> total(policy.parameter_count(), 0.0);
  for (const auto& step : trajectory) {
    const auto g = policy.log_prob_gradient(step.raw, step.action);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
  }
  return total;
}

std::vector<double> reinforce_update(CoordinatorPolicy& policy, const Trajectory& trajectory,
                                     double r_total, double learning_rate) {
  if (trajectory.empty()) throw InvalidArgument("reinforce_update: empty trajectory");
  if (!std::isfinite(r_total)) throw InvalidArgument("reinforce_update: non-finite reward");
  auto step = trajectory_gradient(policy, trajectory);
  const double scale = learning_rate * r_total;
  for (auto& g : step) {
    if (!std::isfinite(g)) throw Error("reinforce_update: non-finite policy gradient");
    g *= scale;
  }
  auto theta = policy.mutable_parameters();
  for (std::size_t i = 0; i < step.size(); ++i) theta[i] += step[i];
  return step;
}

GradcheckResult gradcheck(const CoordinatorPolicy& policy, const RawState& raw, int action,
                          std::span<const double> analytic, double epsilon) {
  if (analytic.size() != policy.parameter_count()) {
    throw InvalidArgument("gradcheck: analytic gradient has the wrong size");
  }
  CoordinatorPolicy probe = policy;
  auto theta = probe.mutable_parameters();
  const auto log_pi = [&] {
    return std::log(policy_prob(probe, probe.state(raw), action));
  };
  GradcheckResult result;
  result.numeric.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double original = theta[i];
    theta[i] = original + epsilon;
    const double up = log_pi();
    theta[i] = original - epsilon;
    const double down = log_pi();
    theta[i] = original;
    const double numeric = (up - down) / (2.0 * epsilon);
    result.numeric[i] = numeric;
    const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(numeric), 1e-6);
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = i;
    }
  }
  return result;
}

GradcheckResult gradcheck(const CoordinatorPolicy& policy, const RawState& raw, int action,
                          double epsilon) {
  const auto analytic = policy.log_prob_gradient(raw, action);
  return gradcheck(policy, raw, action, analytic, epsilon);
}

}  // namespace puli
