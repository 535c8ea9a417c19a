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

#include "puli/trainloop.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "puli/error.hpp"

namespace puli {

namespace {

// Stream ids for Rng::derive; each consumer of randomness gets its own.
constexpr std::uint64_t kTrainPuStream = 1;
constexpr std::uint64_t kValidationPuStream = 2;
constexpr std::uint64_t kPolicyStream = 3;
constexpr std::uint64_t kObserverStream = 4;
constexpr std::uint64_t kPresenterStream = 5;
constexpr std::uint64_t kEpochStream = 100;

std::unique_ptr<ObserverBackend> make_observer(const TrainConfig& c) {
  auto oc = c.observer;
  oc.hidden = c.dims.observer_dim;
  oc.seed = Rng::derive(c.seed, kObserverStream);
  return std::make_unique<SurrogateObserver>(oc);
}

std::unique_ptr<PresenterBackend> make_presenter(const TrainConfig& c) {
  auto pc = c.presenter;
  pc.dim = c.dims.presenter_dim;
  pc.seed = Rng::derive(c.seed, kPresenterStream);
  return std::make_unique<SurrogatePresenter>(pc);
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  for (double l : c.lambda_sweep) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep lambdas must lie in [0, 1]");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (c.k_unlabeled == 0) throw ConfigError("k_unlabeled must be positive");
  if (c.dims.layers < 1) throw ConfigError("the policy needs at least one layer");
  if (c.dims.observer_dim == 0 || c.dims.presenter_dim == 0 || c.dims.hidden_width == 0) {
    throw ConfigError("policy dimensions must be positive");
  }
  if (c.max_summary_tokens == 0) throw ConfigError("max_summary_tokens must be positive");
}

Trainer::Trainer(const Corpus& corpus, TrainConfig config, std::unique_ptr<ObserverBackend> observer,
                 std::unique_ptr<PresenterBackend> presenter, const Summarizer& summarizer)
    : corpus_(corpus),
      config_(std::move(config)),
      observer_(std::move(observer)),
      presenter_(std::move(presenter)),
      builder_(corpus, summarizer),
      policy_(config_.dims, Rng::derive(config_.seed, kPolicyStream)) {
  validate(config_);
  if (observer_->embed_dim() != config_.dims.observer_dim ||
      presenter_->embed_dim() != config_.dims.presenter_dim) {
    throw ConfigError(fmt::format("backend dims {}/{} do not match policy dims {}/{}",
                                  observer_->embed_dim(), presenter_->embed_dim(),
                                  config_.dims.observer_dim, config_.dims.presenter_dim));
  }
  train_ = assemble_pu(corpus, Split::kTrain, config_.k_unlabeled,
                       Rng::derive(config_.seed, kTrainPuStream));
  validation_ = assemble_pu(corpus, Split::kValidation, config_.k_unlabeled,
                            Rng::derive(config_.seed, kValidationPuStream));

  const auto& dialogues = corpus.dialogues();
  auto content_of = [&](const RoundRef& ref) -> const std::string& {
    return dialogues[ref.dialogue].rounds[ref.t].label.intervention->content;
  };
  for (const auto& ref : train_.positives) {
    p_memories_.push_back(builder_.memory(ref));
    p_examples_.push_back({p_memories_.back(), content_of(ref)});
  }
  for (const auto& ref : train_.unlabeled) u_memories_.push_back(builder_.memory(ref));
  for (const auto& ref : validation_.positives) {
    auto memory = builder_.memory(ref);
    observer_val_.push_back({memory, 1});
    presenter_val_.push_back({std::move(memory), content_of(ref)});
  }
  for (const auto& ref : validation_.negatives) observer_val_.push_back({builder_.memory(ref), 0});
}

Trainer::Trainer(const Corpus& corpus, TrainConfig config, const Summarizer& summarizer)
    : Trainer(corpus, config, make_observer(config), make_presenter(config), summarizer) {}

std::pair<double, double> Trainer::pretrain() {
  if (p_memories_.empty()) throw InvalidArgument("pretrain: the positive set is empty");
  if (u_memories_.empty()) throw InvalidArgument("pretrain: the unlabeled set is empty");
  if (observer_val_.empty()) throw InvalidArgument("pretrain: no validation dialogues");
  const double z0 = fit_observer(*observer_, p_memories_, u_memories_, observer_val_);
  const double l0 = fit_presenter(*presenter_, p_examples_, presenter_val_);
  ledger_ = MetricLedger(z0, l0);
  last_presenter_set_ = p_examples_;
  pretrained_ = true;
  spdlog::info("pretrain: z0={:.4f} l0={:.4f} |P|={} |U|={}", z0, l0, p_memories_.size(),
               u_memories_.size());
  return {z0, l0};
}

RawState Trainer::encode(std::size_t u_index) const {
  return encode_raw(*observer_, *presenter_, u_memories_[u_index], policy_);
}

std::string Trainer::pseudo_target(const RoundRef& ref) const {
  if (config_.pseudo_target == PseudoTarget::kSelfGenerated) {
    return presenter_->generate(builder_.memory(ref));
  }
  const auto& d = corpus_.dialogues()[ref.dialogue];
  const auto positive = d.steps_with(LabelKind::kPositive);
  return d.rounds[positive.front()].label.intervention->content;
}

EpochReport Trainer::run_epoch() {
  if (!pretrained_) throw Error("run_epoch before pretrain");
  const auto start = std::chrono::steady_clock::now();
  EpochReport report;
  report.epoch = ++epoch_;

  Rng rng(Rng::derive(config_.seed, kEpochStream + report.epoch));
  std::vector<std::size_t> order(u_memories_.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));

  Trajectory trajectory;
  trajectory.reserve(order.size());
  std::vector<ContextualMemory> negatives;
  std::vector<std::size_t> selected_idx;
  for (auto i : order) {
    auto raw = encode(i);
    const double f = policy_.intervention_prob(raw);
    const int a = sample_action(f, rng);
    trajectory.push_back({std::move(raw), a, std::log(a ? f : 1.0 - f)});
    if (a) {
      report.selected.push_back(train_.unlabeled[i]);
      selected_idx.push_back(i);
    } else {
      report.silent.push_back(train_.unlabeled[i]);
      negatives.push_back(u_memories_[i]);
    }
  }

  if (negatives.empty()) {
    report.z = ledger_.z_history().back();
    ledger_.append_z(report.z);
    spdlog::info("epoch {}: N is empty, observer refit skipped", report.epoch);
  } else {
    report.z = fit_observer(*observer_, p_memories_, negatives, observer_val_);
    report.r_when = r_when(report.z, ledger_);
    report.observer_refit = true;
  }

  report.presenter_set = train_.positives;
  if (selected_idx.empty()) {
    report.l = ledger_.l_history().back();
    ledger_.append_l(report.l);
    last_presenter_set_ = p_examples_;
    spdlog::info("epoch {}: P+ is empty, presenter refit skipped", report.epoch);
  } else {
    auto examples = p_examples_;
    for (auto i : selected_idx) {
      const auto& ref = train_.unlabeled[i];
      examples.push_back({u_memories_[i], pseudo_target(ref)});
      report.presenter_set.push_back(ref);
    }
    report.l = fit_presenter(*presenter_, examples, presenter_val_);
    report.r_how = r_how(report.l, ledger_);
    report.presenter_refit = true;
    last_presenter_set_ = std::move(examples);
  }

  report.r_total = r_total(report.r_when, report.r_how, config_.lambda);
  reinforce_update(policy_, trajectory, report.r_total, config_.learning_rate);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  spdlog::info("epoch {}: |P+|={} |N|={} z={:.4f} l={:.4f} r_total={:+.5f} ({:.2f}s)", report.epoch,
               report.selected.size(), report.silent.size(), report.z, report.l, report.r_total,
               report.wall_seconds);
  return report;
}

std::vector<int> Trainer::threshold_decisions() const {
  std::vector<int> actions;
  actions.reserve(u_memories_.size());
  for (std::size_t i = 0; i < u_memories_.size(); ++i) {
    actions.push_back(threshold_action(policy_.intervention_prob(encode(i))));
  }
  return actions;
}

namespace {

void save_state(const Trainer& trainer, const std::filesystem::path& dir) {
  trainer.policy().save(dir / kPolicyFile);
  if (auto* o = dynamic_cast<const SurrogateObserver*>(&trainer.observer())) o->save(dir / kObserverFile);
  if (auto* p = dynamic_cast<const SurrogatePresenter*>(&trainer.presenter())) {
    p->save(dir / kPresenterFile);
  }
}

}  // namespace

TrainArtifacts train(Trainer& trainer, const std::filesystem::path& out_dir,
                     const std::function<void(const EpochReport&)>& on_epoch) {
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / kMetricsFile, std::ios::binary | std::ios::trunc);
  if (!log) throw Error(fmt::format("cannot write {}", (out_dir / kMetricsFile).string()));
  log << MetricsLog::kHeader << '\n';

  TrainArtifacts artifacts;
  artifacts.dir = out_dir;
  try {
    std::tie(artifacts.z0, artifacts.l0) = trainer.pretrain();
    log << MetricsLog::format({0, artifacts.z0, artifacts.l0, 0.0, 0.0, 0.0}) << '\n' << std::flush;
    for (std::size_t e = 0; e < trainer.config().epochs; ++e) {
      auto report = trainer.run_epoch();
      log << MetricsLog::format(report.metrics()) << '\n' << std::flush;
      if (on_epoch) on_epoch(report);
      artifacts.reports.push_back(std::move(report));
    }
  } catch (...) {
    spdlog::error("training aborted after {} epochs; saving current state", trainer.epochs_run());
    log.flush();
    try {
      save_state(trainer, out_dir);
    } catch (const std::exception& e) {
      spdlog::error("could not save state: {}", e.what());
    }
    throw;
  }
  save_state(trainer, out_dir);
  return artifacts;
}

TrainArtifacts train(const Corpus& corpus, const TrainConfig& config,
                     const std::filesystem::path& out_dir,
                     const std::function<void(const EpochReport&)>& on_epoch) {
  ExtractiveSummarizer summarizer(config.max_summary_tokens);
  Trainer trainer(corpus, config, summarizer);
  return train(trainer, out_dir, on_epoch);
}

std::vector<SweepPoint> lambda_sweep(const Corpus& corpus, const TrainConfig& config,
                                     const std::filesystem::path& out_dir) {
  if (config.lambda_sweep.empty()) throw ConfigError("the lambda sweep list is empty");
  std::vector<SweepPoint> points;
  for (double lambda : config.lambda_sweep) {
    auto c = config;
    c.lambda = lambda;
    const auto artifacts = train(corpus, c, out_dir / fmt::format("lambda-{:.2f}", lambda));
    SweepPoint p;
    p.lambda = lambda;
    p.final_z = artifacts.reports.empty() ? artifacts.z0 : artifacts.reports.back().z;
    p.final_l = artifacts.reports.empty() ? artifacts.l0 : artifacts.reports.back().l;
    p.best_z = artifacts.z0;
    p.best_l = artifacts.l0;
    for (const auto& r : artifacts.reports) {
      p.best_z = std::max(p.best_z, r.z);
      p.best_l = std::max(p.best_l, r.l);
    }
    points.push_back(p);
  }
  return points;
}

std::optional<double> selection_precision(std::span<const RoundRef> rounds,
                                          std::span<const int> actions,
                                          const std::set<RoundRef>& truth) {
  if (rounds.size() != actions.size()) throw InvalidArgument("rounds and actions differ in length");
  std::size_t selected = 0, hits = 0;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (!actions[i]) continue;
    ++selected;
    if (truth.contains(rounds[i])) ++hits;
  }
  if (!selected) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(selected);
}

EvalReport evaluate(const Corpus& corpus, Split split, const ObserverBackend& observer,
                    const PresenterBackend& presenter, const Summarizer& summarizer) {
  if (split == Split::kTrain) throw InvalidArgument("evaluate needs a labeled split");
  // Held-out splits carry their labels, so the sampling seed is irrelevant.
  const auto pu = assemble_pu(corpus, split);
  if (pu.positives.empty()) {
    throw InvalidArgument(fmt::format("split {} has no positives", to_string(split)));
  }
  MemoryBuilder builder(corpus, summarizer);
  std::vector<int> preds;
  std::vector<int> labels;
  EvalReport report;
  report.split = split;
  report.positives = pu.positives.size();
  report.negatives = pu.negatives.size();
  for (const auto& ref : pu.positives) {
    const auto memory = builder.memory(ref);
    preds.push_back(threshold_action(observer.predict(memory)));
    labels.push_back(1);
    const auto& round = corpus.dialogues()[ref.dialogue].rounds[ref.t];
    const auto& reference = round.label.intervention->content;
    const auto generated = presenter.generate(memory);
    report.rouge1 += rouge1(generated, reference);
    report.bleu1 += bleu1(generated, reference);
  }
  for (const auto& ref : pu.negatives) {
    preds.push_back(threshold_action(observer.predict(builder.memory(ref))));
    labels.push_back(0);
  }
  report.rouge1 /= static_cast<double>(pu.positives.size());
  report.bleu1 /= static_cast<double>(pu.positives.size());
  report.timing = classify_metrics(preds, labels);
  return report;
}

SurrogateArtifacts load_artifacts(const std::filesystem::path& dir) {
  return {CoordinatorPolicy::load(dir / kPolicyFile), SurrogateObserver::load(dir / kObserverFile),
          SurrogatePresenter::load(dir / kPresenterFile)};
}

}  // namespace puli
