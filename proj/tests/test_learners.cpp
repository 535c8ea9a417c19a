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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "puli/error.hpp"
#include "puli/forge.hpp"
#include "puli/learners.hpp"
#include "support.hpp"

using namespace puli;
using namespace puli::testing;

namespace {

struct SynthMemories {
  SynthCorpus synth;
  ExtractiveSummarizer summarizer{256};
  std::unique_ptr<MemoryBuilder> builder;
  std::vector<ContextualMemory> train_pos, train_neg;
  std::vector<LabeledMemory> val;
  std::vector<PresenterExample> train_examples, val_examples;

  explicit SynthMemories(std::uint64_t seed, std::size_t n = 120) {
    SynthConfig c;
    c.n_dialogues = n;
    c.validation_count = 20;
    c.seed = seed;
    synth = synthesize(c);
    builder = std::make_unique<MemoryBuilder>(synth.corpus, summarizer);
    const auto& ds = synth.corpus.dialogues();
    for (std::size_t d = 0; d < ds.size(); ++d) {
      for (const auto& r : ds[d].rounds) {
        const RoundRef ref{d, r.t};
        if (ds[d].split == Split::kTrain) {
          if (r.label.kind == LabelKind::kPositive) {
            train_pos.push_back(builder->memory(ref));
            train_examples.push_back({train_pos.back(), r.label.intervention->content});
          } else if (r.t % 4 == 0) {
            train_neg.push_back(builder->memory(ref));
          }
        } else if (r.label.kind != LabelKind::kUnlabeled) {
          const int label = r.label.kind == LabelKind::kPositive ? 1 : 0;
          val.push_back({builder->memory(ref), label});
          if (label) val_examples.push_back({val.back().memory, r.label.intervention->content});
        }
      }
    }
  }
};

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "puli-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(FeatureHasher, DeterministicSaltedAndNormalized) {
  FeatureHasher h(1024, 3);
  EXPECT_EQ(h.bucket("s", "kinase"), h.bucket("s", "kinase"));
  EXPECT_LT(h.bucket("s", "kinase"), 1024u);
  std::vector<double> acc(1024, 0.0);
  h.add_bag("s", "alpha beta beta gamma", 1.0, acc);
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  FeatureHasher other(1024, 4);
  int differ = 0;
  for (const char* w : {"a", "b", "c", "d", "e", "f", "g", "h"}) differ += h.bucket("s", w) != other.bucket("s", w);
  EXPECT_GT(differ, 0);
}

TEST(SurrogateObserver, EmbedAndPredictContracts) {
  SynthMemories data(1, 40);
  SurrogateObserver obs({.n_buckets = 512, .hidden = 16, .seed = 9});
  const auto& m = data.train_pos.front();
  EXPECT_EQ(obs.embed(m).size(), 16u);
  EXPECT_EQ(obs.embed(m), obs.embed(m));
  obs.fit(data.train_pos, data.train_neg);
  EXPECT_EQ(obs.embed(m).size(), 16u);
  for (const auto& item : data.val) {
    const double p = obs.predict(item.memory);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_EQ(obs.fit_count(), 1u);
}

TEST(SurrogateObserver, GradientStepDecreasesLossOnFixedBatch) {
  SynthMemories data(2, 40);
  SurrogateObserver obs({.n_buckets = 512, .hidden = 16, .seed = 4});
  std::vector<SurrogateObserver::Example> batch;
  for (std::size_t i = 0; i < 5; ++i) {
    batch.push_back(obs.featurize(data.train_pos[i], 1));
    batch.push_back(obs.featurize(data.train_neg[i], 0));
  }
  ASSERT_EQ(batch.size(), 10u);
  double before = obs.loss(batch);
  for (int step = 0; step < 25; ++step) {
    obs.gradient_step(batch, 1e-3);
    const double after = obs.loss(batch);
    EXPECT_LT(after, before) << "step " << step;
    before = after;
  }
}

TEST(SurrogateObserver, SeparatesSyntheticDrift) {
  SynthMemories data(3);
  SurrogateObserver obs({.seed = 1});
  const double z = fit_observer(obs, data.train_pos, data.train_neg, data.val);
  EXPECT_GE(z, 0.9);
}

TEST(SurrogateObserver, SaveLoadRoundTrip) {
  SynthMemories data(4, 40);
  SurrogateObserver obs({.n_buckets = 256, .hidden = 8, .seed = 2});
  obs.fit(data.train_pos, data.train_neg);
  const auto path = temp_path("observer.json");
  obs.save(path);
  const auto back = SurrogateObserver::load(path);
  for (const auto& item : data.val) {
    EXPECT_EQ(back.predict(item.memory), obs.predict(item.memory));
    EXPECT_EQ(back.embed(item.memory), obs.embed(item.memory));
  }
}

TEST(FitObserver, PreconditionsAndConstantPredictor) {
  FixedObserver always(0.9);
  const auto p = make_proposal("p");
  const ContextualMemory m{std::cref(p), {}, ""};
  std::vector<LabeledMemory> all_positive{{m, 1}, {m, 1}};
  EXPECT_DOUBLE_EQ(always.eval_accuracy(all_positive), 1.0);
  std::vector<ContextualMemory> one{m};
  EXPECT_THROW(fit_observer(always, one, {}, all_positive), InvalidArgument);
  EXPECT_THROW(fit_observer(always, {}, one, all_positive), InvalidArgument);
  EXPECT_THROW(always.eval_accuracy({}), InvalidArgument);
}

TEST(SurrogatePresenter, SelfRetrievalAndSingleExample) {
  SynthMemories data(5, 60);
  SurrogatePresenter pres({.seed = 3});
  const double l = fit_presenter(pres, data.train_examples, data.train_examples);
  EXPECT_DOUBLE_EQ(l, 1.0);
  for (const auto& ex : data.train_examples) EXPECT_EQ(pres.generate(ex.memory), ex.intervention);

  SurrogatePresenter single({.seed = 3});
  single.fit(std::span(data.train_examples).first(1));
  for (const auto& ex : data.val_examples) {
    EXPECT_EQ(single.generate(ex.memory), data.train_examples.front().intervention);
  }
  EXPECT_THROW(fit_presenter(single, {}, data.val_examples), InvalidArgument);
}

TEST(SurrogatePresenter, EmbedDeterminismAndPersistence) {
  SynthMemories data(6, 40);
  SurrogatePresenter pres({.dim = 32, .seed = 8});
  pres.fit(data.train_examples);
  const auto& m = data.val_examples.front().memory;
  EXPECT_EQ(pres.embed(m).size(), 32u);
  EXPECT_EQ(pres.embed(m), pres.embed(m));
  const auto path = temp_path("presenter.json");
  pres.save(path);
  const auto back = SurrogatePresenter::load(path);
  EXPECT_EQ(back.index_size(), pres.index_size());
  for (const auto& ex : data.val_examples) {
    EXPECT_EQ(back.generate(ex.memory), pres.generate(ex.memory));
    EXPECT_EQ(back.embed(ex.memory), pres.embed(ex.memory));
  }
}

TEST(SurrogatePresenter, MoreOnSignalPositivesDoNotHurt) {
  // Paired runs: a quarter of P versus all of P, five seeds.
  int not_worse = 0;
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    SynthMemories data(seed, 120);
    const auto n = data.train_examples.size();
    SurrogatePresenter small({.seed = seed}), large({.seed = seed});
    const double l_small =
        fit_presenter(small, std::span(data.train_examples).first(n / 4), data.val_examples);
    const double l_large = fit_presenter(large, data.train_examples, data.val_examples);
    not_worse += l_large >= l_small;
  }
  EXPECT_GE(not_worse, 4);
}
