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

#include "puli/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "puli/error.hpp"
#include "puli/metrics.hpp"
#include "puli/rng.hpp"

namespace puli {

double ObserverBackend::eval_accuracy(std::span<const LabeledMemory> valset) const {
  if (valset.empty()) throw InvalidArgument("eval_accuracy: empty validation set");
  std::size_t correct = 0;
  for (const auto& item : valset) {
    const int pred = predict(item.memory) >= 0.5 ? 1 : 0;
    if (pred == (item.label != 0 ? 1 : 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(valset.size());
}

double PresenterBackend::eval_rouge1(std::span<const PresenterExample> valset) const {
  if (valset.empty()) throw InvalidArgument("eval_rouge1: empty validation set");
  double total = 0.0;
  for (const auto& item : valset) total += rouge1(generate(item.memory), item.intervention);
  return total / static_cast<double>(valset.size());
}

double fit_observer(ObserverBackend& backend, std::span<const ContextualMemory> positives,
                    std::span<const ContextualMemory> negatives,
                    std::span<const LabeledMemory> valset) {
  if (positives.empty() || negatives.empty()) {
    throw InvalidArgument("fit_observer: both classes need at least one example");
  }
  if (valset.empty()) throw InvalidArgument("fit_observer: empty validation set");
  backend.fit(positives, negatives);
  return backend.eval_accuracy(valset);
}

double fit_presenter(PresenterBackend& backend, std::span<const PresenterExample> positives,
                     std::span<const PresenterExample> valset) {
  if (positives.empty()) throw InvalidArgument("fit_presenter: empty positive set");
  if (valset.empty()) throw InvalidArgument("fit_presenter: empty validation set");
  backend.fit(positives);
  return backend.eval_rouge1(valset);
}

// --- feature hashing ------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SparseVector to_sparse(const std::vector<double>& dense) {
  SparseVector out;
  for (std::uint32_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) out.emplace_back(i, dense[i]);
  }
  return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::uint32_t FeatureHasher::bucket(std::string_view salt, std::string_view token) const {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed_;
  h = fnv1a(h, salt);
  h = fnv1a(h, "\x1f");
  h = fnv1a(h, token);
  return static_cast<std::uint32_t>(h % n_buckets_);
}

void FeatureHasher::add_bag(std::string_view salt, std::string_view text, double weight,
                            std::vector<double>& acc) const {
  std::map<std::uint32_t, double> bag;
  for (const auto& tok : tokenize(text)) bag[bucket(salt, tok)] += 1.0;
  double norm = 0.0;
  for (const auto& [_, v] : bag) norm += v * v;
  if (norm == 0.0) return;
  const double scale = weight / std::sqrt(norm);
  for (const auto& [b, v] : bag) acc[b] += v * scale;
}

SparseVector FeatureHasher::sectioned(const ContextualMemory& memory) const {
  std::vector<double> acc(n_buckets_, 0.0);
  const auto& p = memory.proposal.get();
  add_bag("proposal", p.goal + "\n" + p.background + "\n" + p.datasets_desc, 1.0, acc);
  add_bag("long", memory.long_term, 1.0, acc);
  const auto& window = memory.short_term;
  for (std::size_t back = 0; back < window.size(); ++back) {
    const auto& round = window[window.size() - 1 - back];
    add_bag("recent" + std::to_string(back), round.text, 1.0, acc);
  }
  return to_sparse(acc);
}

SparseVector FeatureHasher::flat(const ContextualMemory& memory) const {
  std::vector<double> acc(n_buckets_, 0.0);
  add_bag("", render(memory), 1.0, acc);
  return to_sparse(acc);
}

// --- surrogate observer ---------------------------------------------------

struct SurrogateObserver::Gradients {
  explicit Gradients(const SurrogateObserver& model)
      : w1(model.w1_.size(), 0.0),
        touched(model.config_.n_buckets, false),
        b1(model.b1_.size(), 0.0),
        w2(model.w2_.size(), 0.0) {}

  std::vector<double> w1;
  std::vector<bool> touched;
  std::vector<std::uint32_t> rows;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
  double total_weight = 0.0;
};

SurrogateObserver::SurrogateObserver(SurrogateObserverConfig config)
    : config_(config), hasher_(config.n_buckets, config.seed) {
  if (config_.hidden == 0 || config_.n_buckets == 0) {
    throw InvalidArgument("SurrogateObserver: hidden and n_buckets must be positive");
  }
  Rng rng(Rng::derive(config_.seed, 0x0b5e));
  w1_.resize(static_cast<std::size_t>(config_.n_buckets) * config_.hidden);
  for (auto& w : w1_) w = rng.uniform01() - 0.5;
  b1_.assign(config_.hidden, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
  w2_.resize(config_.hidden);
  for (auto& w : w2_) w = (2.0 * rng.uniform01() - 1.0) * bound;
}

std::vector<double> SurrogateObserver::hidden(const SparseVector& x) const {
  const std::size_t h = config_.hidden;
  std::vector<double> out = b1_;
  for (const auto& [j, v] : x) {
    const double* row = &w1_[static_cast<std::size_t>(j) * h];
    for (std::size_t k = 0; k < h; ++k) out[k] += v * row[k];
  }
  for (auto& a : out) a = std::max(a, 0.0);
  return out;
}

double SurrogateObserver::predict_features(const SparseVector& x) const {
  const auto h = hidden(x);
  return sigmoid(std::inner_product(h.begin(), h.end(), w2_.begin(), b2_));
}

SurrogateObserver::Example SurrogateObserver::featurize(const ContextualMemory& memory,
                                                        int label) const {
  return {hasher_.sectioned(memory), label != 0 ? 1.0 : 0.0, 1.0};
}

std::vector<double> SurrogateObserver::embed(const ContextualMemory& memory) const {
  return hidden(hasher_.sectioned(memory));
}

double SurrogateObserver::predict(const ContextualMemory& memory) const {
  return predict_features(hasher_.sectioned(memory));
}

double SurrogateObserver::loss(std::span<const Example> batch) const {
  double total = 0.0, weight = 0.0;
  for (const auto& ex : batch) {
    const double p = std::clamp(predict_features(ex.features), 1e-12, 1.0 - 1e-12);
    total -= ex.weight * (ex.label * std::log(p) + (1.0 - ex.label) * std::log(1.0 - p));
    weight += ex.weight;
  }
  return weight > 0.0 ? total / weight : 0.0;
}

void SurrogateObserver::accumulate(const Example& ex, Gradients& g) const {
  const std::size_t h = config_.hidden;
  const auto act = hidden(ex.features);
  const double p = sigmoid(std::inner_product(act.begin(), act.end(), w2_.begin(), b2_));
  const double dz = ex.weight * (p - ex.label);
  g.b2 += dz;
  g.total_weight += ex.weight;
  std::vector<double> dh(h);
  for (std::size_t k = 0; k < h; ++k) {
    g.w2[k] += dz * act[k];
    dh[k] = act[k] > 0.0 ? dz * w2_[k] : 0.0;
    g.b1[k] += dh[k];
  }
  for (const auto& [j, v] : ex.features) {
    if (!g.touched[j]) {
      g.touched[j] = true;
      g.rows.push_back(j);
    }
    double* row = &g.w1[static_cast<std::size_t>(j) * h];
    for (std::size_t k = 0; k < h; ++k) row[k] += v * dh[k];
  }
}

void SurrogateObserver::gradient_step(std::span<const Example> batch, double learning_rate) {
  if (batch.empty()) return;
  Gradients g(*this);
  for (const auto& ex : batch) accumulate(ex, g);
  const double scale = learning_rate / g.total_weight;
  const std::size_t h = config_.hidden;
  for (auto j : g.rows) {
    for (std::size_t k = 0; k < h; ++k) {
      w1_[static_cast<std::size_t>(j) * h + k] -= scale * g.w1[static_cast<std::size_t>(j) * h + k];
    }
  }
  for (std::size_t k = 0; k < h; ++k) {
    b1_[k] -= scale * g.b1[k];
    w2_[k] -= scale * g.w2[k];
  }
  b2_ -= scale * g.b2;
}

void SurrogateObserver::fit(std::span<const ContextualMemory> positives,
                            std::span<const ContextualMemory> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw InvalidArgument("SurrogateObserver::fit: both classes need examples");
  }
  std::vector<Example> data;
  data.reserve(positives.size() + negatives.size());
  const double pos_weight =
      config_.balance_classes ? 0.5 * static_cast<double>(positives.size() + negatives.size()) /
                                    static_cast<double>(positives.size())
                              : 1.0;
  const double neg_weight =
      config_.balance_classes ? 0.5 * static_cast<double>(positives.size() + negatives.size()) /
                                    static_cast<double>(negatives.size())
                              : 1.0;
  for (const auto& m : positives) {
    data.push_back(featurize(m, 1));
    data.back().weight = pos_weight;
  }
  for (const auto& m : negatives) {
    data.push_back(featurize(m, 0));
    data.back().weight = neg_weight;
  }

  // Adam with lazily updated rows for the sparse input layer.
  const std::size_t h = config_.hidden;
  std::vector<double> m1(w1_.size(), 0.0), v1(w1_.size(), 0.0);
  std::vector<double> mb1(h, 0.0), vb1(h, 0.0), mw2(h, 0.0), vw2(h, 0.0);
  double mb2 = 0.0, vb2 = 0.0;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const auto adam = [&](double& param, double& m, double& v, double grad, double lr_t) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    param -= lr_t * m / (std::sqrt(v) + eps);
  };

  Rng rng(Rng::derive(config_.seed, 0xf17 + fits_));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  const std::size_t batch = std::max<std::size_t>(1, config_.batch_size);
  for (std::size_t epoch = 0; epoch < config_.epochs_per_fit; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      Gradients g(*this);
      const std::size_t end = std::min(order.size(), start + batch);
      for (std::size_t i = start; i < end; ++i) accumulate(data[order[i]], g);
      ++step;
      const double lr_t = config_.learning_rate *
                          std::sqrt(1.0 - std::pow(beta2, static_cast<double>(step))) /
                          (1.0 - std::pow(beta1, static_cast<double>(step)));
      const double inv = 1.0 / g.total_weight;
      for (auto j : g.rows) {
        const std::size_t base = static_cast<std::size_t>(j) * h;
        for (std::size_t k = 0; k < h; ++k) {
          adam(w1_[base + k], m1[base + k], v1[base + k], g.w1[base + k] * inv, lr_t);
        }
      }
      for (std::size_t k = 0; k < h; ++k) {
        adam(b1_[k], mb1[k], vb1[k], g.b1[k] * inv, lr_t);
        adam(w2_[k], mw2[k], vw2[k], g.w2[k] * inv, lr_t);
      }
      adam(b2_, mb2, vb2, g.b2 * inv, lr_t);
    }
  }
  ++fits_;
}

void SurrogateObserver::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "puli-observer";
  j["version"] = 1;
  j["config"] = {{"n_buckets", config_.n_buckets},
                 {"hidden", config_.hidden},
                 {"learning_rate", config_.learning_rate},
                 {"epochs_per_fit", config_.epochs_per_fit},
                 {"batch_size", config_.batch_size},
                 {"balance_classes", config_.balance_classes},
                 {"seed", config_.seed}};
  j["fits"] = fits_;
  j["w1"] = w1_;
  j["b1"] = b1_;
  j["w2"] = w2_;
  j["b2"] = b2_;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write observer file '" + path.string() + "'");
  out << j.dump() << '\n';
}

SurrogateObserver SurrogateObserver::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open observer file '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "puli-observer" || j.at("version") != 1) {
      throw Error("not a puli-observer v1 file: '" + path.string() + "'");
    }
    const auto& c = j.at("config");
    SurrogateObserverConfig config;
    config.n_buckets = c.at("n_buckets").get<std::uint32_t>();
    config.hidden = c.at("hidden").get<std::size_t>();
    config.learning_rate = c.at("learning_rate").get<double>();
    config.epochs_per_fit = c.at("epochs_per_fit").get<std::size_t>();
    config.batch_size = c.at("batch_size").get<std::size_t>();
    config.balance_classes = c.at("balance_classes").get<bool>();
    config.seed = c.at("seed").get<std::uint64_t>();
    SurrogateObserver model(config);
    model.fits_ = j.at("fits").get<std::size_t>();
    model.w1_ = j.at("w1").get<std::vector<double>>();
    model.b1_ = j.at("b1").get<std::vector<double>>();
    model.w2_ = j.at("w2").get<std::vector<double>>();
    model.b2_ = j.at("b2").get<double>();
    if (model.w1_.size() != static_cast<std::size_t>(config.n_buckets) * config.hidden ||
        model.b1_.size() != config.hidden || model.w2_.size() != config.hidden) {
      throw Error("observer file has inconsistent dimensions");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed observer file '" + path.string() + "': " + e.what());
  }
}

// --- surrogate presenter --------------------------------------------------

SurrogatePresenter::SurrogatePresenter(SurrogatePresenterConfig config)
    : config_(config), hasher_(config.n_buckets, config.seed) {
  if (config_.dim == 0 || config_.n_buckets == 0) {
    throw InvalidArgument("SurrogatePresenter: dim and n_buckets must be positive");
  }
}

double SurrogatePresenter::projection(std::uint32_t bucket, std::size_t component) const {
  const std::uint64_t h =
      Rng::derive(config_.seed ^ 0x9e3779b97f4a7c15ULL,
                  static_cast<std::uint64_t>(bucket) * config_.dim + component);
  return (h & 1U ? 1.0 : -1.0) / std::sqrt(static_cast<double>(config_.dim));
}

std::vector<double> SurrogatePresenter::embed(const ContextualMemory& memory) const {
  std::vector<double> key(config_.dim, 0.0);
  for (const auto& [j, v] : hasher_.flat(memory)) {
    for (std::size_t c = 0; c < config_.dim; ++c) key[c] += v * projection(j, c);
  }
  double norm = 0.0;
  for (double x : key) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : key) x /= norm;
  }
  return key;
}

std::string SurrogatePresenter::generate(const ContextualMemory& memory) const {
  if (entries_.empty()) throw Error("presenter has no indexed interventions");
  const auto key = embed(memory);
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const double sim =
        std::inner_product(key.begin(), key.end(), entries_[i].key.begin(), 0.0);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return entries_[best].text;
}

void SurrogatePresenter::fit(std::span<const PresenterExample> positives) {
  if (positives.empty()) throw InvalidArgument("SurrogatePresenter::fit: empty positive set");
  std::vector<Entry> entries;
  entries.reserve(positives.size());
  for (const auto& ex : positives) entries.push_back({embed(ex.memory), ex.intervention});
  entries_ = std::move(entries);
}

void SurrogatePresenter::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "puli-presenter";
  j["version"] = 1;
  j["config"] = {{"n_buckets", config_.n_buckets}, {"dim", config_.dim}, {"seed", config_.seed}};
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries_) entries.push_back({{"key", e.key}, {"text", e.text}});
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write presenter file '" + path.string() + "'");
  out << j.dump() << '\n';
}

SurrogatePresenter SurrogatePresenter::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open presenter file '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "puli-presenter" || j.at("version") != 1) {
      throw Error("not a puli-presenter v1 file: '" + path.string() + "'");
    }
    const auto& c = j.at("config");
    SurrogatePresenterConfig config;
    config.n_buckets = c.at("n_buckets").get<std::uint32_t>();
    config.dim = c.at("dim").get<std::size_t>();
    config.seed = c.at("seed").get<std::uint64_t>();
    SurrogatePresenter model(config);
    for (const auto& e : j.at("entries")) {
      Entry entry{e.at("key").get<std::vector<double>>(), e.at("text").get<std::string>()};
      if (entry.key.size() != config.dim) throw Error("presenter entry has wrong key size");
      model.entries_.push_back(std::move(entry));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed presenter file '" + path.string() + "': " + e.what());
  }
}

}  // namespace puli
