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
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "puli/coordinator.hpp"
#include "puli/corpus.hpp"
#include "puli/learners.hpp"
#include "puli/memory.hpp"
#include "puli/metrics.hpp"
#include "puli/rewards.hpp"

namespace puli {

enum class BackendKind { kSurrogate, kRemote };

/// What the presenter learns for a selected round that has no labeled intervention.
enum class PseudoTarget {
  kDialogueLabel,  // the labeled intervention of the same dialogue
  kSelfGenerated,  // the presenter's own output at selection time
};

struct TrainConfig {
  std::size_t epochs = 20;
  double lambda = kDefaultLambda;
  double learning_rate = 1e-4;
  std::size_t k_unlabeled = kDefaultUnlabeledPerDialogue;
  std::uint64_t seed = 0;
  BackendKind backend = BackendKind::kSurrogate;
  PolicyDims dims;
  std::size_t max_summary_tokens = kDefaultMaxSummaryTokens;
  SurrogateObserverConfig observer;
  SurrogatePresenterConfig presenter;
  PseudoTarget pseudo_target = PseudoTarget::kDialogueLabel;
  std::vector<double> lambda_sweep;
};

/// Throws ConfigError on epochs == 0 with a sweep, lambda outside [0, 1],
/// non-positive learning rate, or backend dims that disagree with the policy.
void validate(const TrainConfig& config);

struct EpochReport {
  std::size_t epoch = 0;
  std::vector<RoundRef> selected;  // P+
  std::vector<RoundRef> silent;    // N
  std::vector<RoundRef> presenter_set;  // P' = P + P+
  double z = 0.0;
  double l = 0.0;
  double r_when = 0.0;
  double r_how = 0.0;
  double r_total = 0.0;
  bool observer_refit = false;
  bool presenter_refit = false;
  double wall_seconds = 0.0;

  EpochMetrics metrics() const { return {epoch, z, l, r_when, r_how, r_total}; }
};

/// Algorithm state for one run: PU data, backends, policy and ledger.
class Trainer {
 public:
  Trainer(const Corpus& corpus, TrainConfig config, std::unique_ptr<ObserverBackend> observer,
          std::unique_ptr<PresenterBackend> presenter, const Summarizer& summarizer);
  /// Surrogate backends seeded from the config.
  Trainer(const Corpus& corpus, TrainConfig config, const Summarizer& summarizer);

  /// Fits the observer on P against U taken as negatives and the presenter
  /// on P; records z^0 and l^0. Throws InvalidArgument when P is empty.
  std::pair<double, double> pretrain();
  /// One pass of selection, refits, rewards and a single policy update.
  EpochReport run_epoch();

  const TrainConfig& config() const { return config_; }
  const PUDataset& train_set() const { return train_; }
  const PUDataset& validation_set() const { return validation_; }
  const MetricLedger& ledger() const { return ledger_; }
  const CoordinatorPolicy& policy() const { return policy_; }
  CoordinatorPolicy& mutable_policy() { return policy_; }
  const ObserverBackend& observer() const { return *observer_; }
  const PresenterBackend& presenter() const { return *presenter_; }
  ObserverBackend& mutable_observer() { return *observer_; }
  PresenterBackend& mutable_presenter() { return *presenter_; }
  const MemoryBuilder& memories() const { return builder_; }
  std::size_t epochs_run() const { return epoch_; }
  const std::vector<PresenterExample>& presenter_training_set() const { return last_presenter_set_; }

  /// Threshold-mode decisions of the current policy over U, in U order.
  std::vector<int> threshold_decisions() const;

 private:
  RawState encode(std::size_t u_index) const;
  std::string pseudo_target(const RoundRef& ref) const;

  const Corpus& corpus_;
  TrainConfig config_;
  std::unique_ptr<ObserverBackend> observer_;
  std::unique_ptr<PresenterBackend> presenter_;
  MemoryBuilder builder_;
  CoordinatorPolicy policy_;
  MetricLedger ledger_;
  PUDataset train_;
  PUDataset validation_;
  std::vector<ContextualMemory> p_memories_;
  std::vector<ContextualMemory> u_memories_;
  std::vector<PresenterExample> p_examples_;
  std::vector<LabeledMemory> observer_val_;
  std::vector<PresenterExample> presenter_val_;
  std::vector<PresenterExample> last_presenter_set_;
  std::size_t epoch_ = 0;
  bool pretrained_ = false;
};

/// Persisted outputs of a run.
struct TrainArtifacts {
  std::filesystem::path dir;
  std::vector<EpochReport> reports;
  double z0 = 0.0;
  double l0 = 0.0;
};

inline constexpr const char* kPolicyFile = "policy.ckpt";
inline constexpr const char* kObserverFile = "observer.json";
inline constexpr const char* kPresenterFile = "presenter.json";
inline constexpr const char* kMetricsFile = "metrics.tsv";

/// Pretrain plus config.epochs epochs with surrogate backends, writing the
/// checkpoint, backend states and metrics log into `out_dir`. The metrics
/// log is flushed after every epoch; on failure the current state is saved
/// before the error propagates.
TrainArtifacts train(const Corpus& corpus, const TrainConfig& config,
                     const std::filesystem::path& out_dir,
                     const std::function<void(const EpochReport&)>& on_epoch = {});

/// Same as `train` but with caller-supplied backends (remote variants).
TrainArtifacts train(Trainer& trainer, const std::filesystem::path& out_dir,
                     const std::function<void(const EpochReport&)>& on_epoch = {});

struct SweepPoint {
  double lambda = 0.0;
  double final_z = 0.0;
  double final_l = 0.0;
  double best_z = 0.0;
  double best_l = 0.0;
};

/// Runs one full training per lambda (artifacts under out_dir/lambda-<value>, two decimals).
std::vector<SweepPoint> lambda_sweep(const Corpus& corpus, const TrainConfig& config,
                                     const std::filesystem::path& out_dir);

/// Held-out scores of a trained observer/presenter pair on one labeled split.
/// Timing uses the observer's threshold decision on the split's positives
/// (label 1) and negatives (label 0); content scores the presenter's output
/// for each positive against its labeled intervention.
struct EvalReport {
  Split split = Split::kTest;
  ClassifyMetrics timing;
  double rouge1 = 0.0;
  double bleu1 = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Throws InvalidArgument for the train split or a split with no positives.
EvalReport evaluate(const Corpus& corpus, Split split, const ObserverBackend& observer,
                    const PresenterBackend& presenter, const Summarizer& summarizer);

/// Surrogate backends restored from a training output directory.
struct SurrogateArtifacts {
  CoordinatorPolicy policy;
  SurrogateObserver observer;
  SurrogatePresenter presenter;
};
SurrogateArtifacts load_artifacts(const std::filesystem::path& dir);

/// Fraction of the given actions' selected rounds that are in `truth`;
/// nullopt when nothing was selected.
std::optional<double> selection_precision(std::span<const RoundRef> rounds,
                                          std::span<const int> actions,
                                          const std::set<RoundRef>& truth);

}  // namespace puli
