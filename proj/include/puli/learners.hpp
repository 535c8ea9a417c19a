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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "puli/memory.hpp"

namespace puli {

struct LabeledMemory {
  ContextualMemory memory;
  int label = 0;  // 1 = intervene
};

struct PresenterExample {
  ContextualMemory memory;
  std::string intervention;
};

/// Timing model contract: decides whether a memory calls for an intervention.
class ObserverBackend {
 public:
  virtual ~ObserverBackend() = default;

  virtual std::size_t embed_dim() const = 0;
  /// Last-hidden-layer representation; length embed_dim().
  virtual std::vector<double> embed(const ContextualMemory& memory) const = 0;
  /// Probability of intervening, in [0, 1].
  virtual double predict(const ContextualMemory& memory) const = 0;
  virtual void fit(std::span<const ContextualMemory> positives,
                   std::span<const ContextualMemory> negatives) = 0;

  /// Accuracy of predict() >= 0.5 against the labels.
  virtual double eval_accuracy(std::span<const LabeledMemory> valset) const;
};

/// Content model contract: writes the intervention for a memory.
class PresenterBackend {
 public:
  virtual ~PresenterBackend() = default;

  virtual std::size_t embed_dim() const = 0;
  virtual std::vector<double> embed(const ContextualMemory& memory) const = 0;
  virtual std::string generate(const ContextualMemory& memory) const = 0;
  virtual void fit(std::span<const PresenterExample> positives) = 0;

  /// Mean ROUGE-1 of generate() against each example's intervention text.
  virtual double eval_rouge1(std::span<const PresenterExample> valset) const;
};

/// Fits on P vs N and returns validation accuracy. Throws InvalidArgument
/// when either class or the validation set is empty.
double fit_observer(ObserverBackend& backend, std::span<const ContextualMemory> positives,
                    std::span<const ContextualMemory> negatives,
                    std::span<const LabeledMemory> valset);

/// Fits on P' and returns mean validation ROUGE-1. Throws on empty P'.
double fit_presenter(PresenterBackend& backend, std::span<const PresenterExample> positives,
                     std::span<const PresenterExample> valset);

/// Sparse feature vector: (bucket, value) pairs sorted by bucket.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

/// Token-to-bucket hashing (FNV-1a, salted per memory section).
class FeatureHasher {
 public:
  explicit FeatureHasher(std::uint32_t n_buckets = 4096, std::uint64_t seed = 0)
      : n_buckets_(n_buckets), seed_(seed) {}

  std::uint32_t n_buckets() const { return n_buckets_; }
  std::uint32_t bucket(std::string_view salt, std::string_view token) const;

  /// Adds an L2-normalized bag of the text's tokens to `acc`, scaled by `weight`.
  void add_bag(std::string_view salt, std::string_view text, double weight,
               std::vector<double>& acc) const;

  /// One normalized bag per memory section: proposal, long-term summary,
  /// and each short-term slot by recency (current round first).
  SparseVector sectioned(const ContextualMemory& memory) const;
  /// Single normalized bag over the whole prompt rendering.
  SparseVector flat(const ContextualMemory& memory) const;

 private:
  std::uint32_t n_buckets_;
  std::uint64_t seed_;
};

struct SurrogateObserverConfig {
  std::uint32_t n_buckets = 4096;
  std::size_t hidden = 64;
  double learning_rate = 0.01;  // Adam
  std::size_t epochs_per_fit = 8;
  std::size_t batch_size = 16;
  bool balance_classes = false;
  std::uint64_t seed = 0;
};

/// Hashed bag-of-tokens features, one ReLU hidden layer, sigmoid output,
/// trained with binary cross-entropy. Refits continue from the current weights.
class SurrogateObserver final : public ObserverBackend {
 public:
  explicit SurrogateObserver(SurrogateObserverConfig config = {});

  std::size_t embed_dim() const override { return config_.hidden; }
  std::vector<double> embed(const ContextualMemory& memory) const override;
  double predict(const ContextualMemory& memory) const override;
  void fit(std::span<const ContextualMemory> positives,
           std::span<const ContextualMemory> negatives) override;

  struct Example {
    SparseVector features;
    double label = 0.0;
    double weight = 1.0;
  };

  Example featurize(const ContextualMemory& memory, int label) const;
  double predict_features(const SparseVector& x) const;
  /// Weighted mean binary cross-entropy.
  double loss(std::span<const Example> batch) const;
  /// One plain gradient-descent step on the weighted mean cross-entropy.
  void gradient_step(std::span<const Example> batch, double learning_rate);

  const SurrogateObserverConfig& config() const { return config_; }
  std::size_t fit_count() const { return fits_; }

  void save(const std::filesystem::path& path) const;
  static SurrogateObserver load(const std::filesystem::path& path);

 private:
  struct Gradients;
  std::vector<double> hidden(const SparseVector& x) const;
  void accumulate(const Example& ex, Gradients& grads) const;

  SurrogateObserverConfig config_;
  FeatureHasher hasher_;
  std::vector<double> w1_;  // hidden x n_buckets, row-major
  std::vector<double> b1_;
  std::vector<double> w2_;
  double b2_ = 0.0;
  std::size_t fits_ = 0;
};

struct SurrogatePresenterConfig {
  std::uint32_t n_buckets = 4096;
  std::size_t dim = 32;
  std::uint64_t seed = 0;
};

/// Nearest-neighbour generator: memories are hashed, randomly projected to
/// `dim` dimensions, and generation returns the intervention text of the most
/// cosine-similar indexed memory (ties go to the earliest entry).
class SurrogatePresenter final : public PresenterBackend {
 public:
  explicit SurrogatePresenter(SurrogatePresenterConfig config = {});

  std::size_t embed_dim() const override { return config_.dim; }
  std::vector<double> embed(const ContextualMemory& memory) const override;
  std::string generate(const ContextualMemory& memory) const override;
  void fit(std::span<const PresenterExample> positives) override;

  std::size_t index_size() const { return entries_.size(); }
  const SurrogatePresenterConfig& config() const { return config_; }

  void save(const std::filesystem::path& path) const;
  static SurrogatePresenter load(const std::filesystem::path& path);

 private:
  struct Entry {
    std::vector<double> key;
    std::string text;
  };
  double projection(std::uint32_t bucket, std::size_t component) const;

  SurrogatePresenterConfig config_;
  FeatureHasher hasher_;
  std::vector<Entry> entries_;
};

}  // namespace puli
