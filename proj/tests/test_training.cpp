// Copyright 2026 The ferpair Authors.
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

#include <cmath>

#include "doctest.h"
#include "ferpair/random.hpp"
#include "ferpair/training.hpp"

using namespace ferpair;

namespace {

/// Two isotropic unit-variance classes whose means differ by `gap` in every
/// coordinate.
Dataset two_class(std::size_t per_class, std::size_t dim, double gap, std::uint64_t seed,
                  int a = 0, int b = 1) {
  SynthesisConfig cfg;
  cfg.feature_dim = dim;
  cfg.seed = seed;
  const std::vector<double> ma(dim, -gap / 2), mb(dim, gap / 2);
  cfg.classes = {{a, per_class, ma, 1.0}, {b, per_class, mb, 1.0}};
  return synthesize_dataset(cfg);
}

/// Nearest-class-mean predictions: the Bayes rule for equal isotropic classes.
double nearest_mean_accuracy(const Dataset& train, const Dataset& test) {
  std::array<std::vector<double>, kNumClasses> means;
  for (auto& m : means) m.assign(train.feature_dim(), 0.0);
  for (const auto& r : train) {
    for (std::size_t i = 0; i < r.features.size(); ++i) means[static_cast<std::size_t>(r.expression)][i] += r.features[i];
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (train.class_counts()[c] == 0) continue;
    for (auto& v : means[c]) v /= static_cast<double>(train.class_counts()[c]);
  }
  std::size_t correct = 0;
  for (const auto& r : test) {
    int best = -1;
    double best_d = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (train.class_counts()[c] == 0) continue;
      double d = 0.0;
      for (std::size_t i = 0; i < r.features.size(); ++i) d += (r.features[i] - means[c][i]) * (r.features[i] - means[c][i]);
      if (best < 0 || d < best_d) {
        best = static_cast<int>(c);
        best_d = d;
      }
    }
    if (best == r.expression) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST_CASE("adam_step fixed point and first step") {
  std::vector<double> p = {0.5, -1.0, 2.0};
  const std::vector<double> zero(3, 0.0);
  AdamState s(3);
  adam_step(p, zero, s, 0.1, 0.0);
  CHECK(p == std::vector<double>{0.5, -1.0, 2.0});
  CHECK(s.t == 1);

  // Closed form at t = 1: m_hat = g, v_hat = g^2, step = -lr * g / (|g| + eps).
  std::vector<double> q = {0.0, 0.0, 0.0};
  const std::vector<double> g = {0.3, -2.0, 1e-3};
  AdamState s2(3);
  adam_step(q, g, s2, 0.01, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(q[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(q[i] == doctest::Approx(-0.01 * (g[i] > 0 ? 1.0 : -1.0)).epsilon(1e-4));
  }
}

TEST_CASE("adam_step weight decay and error handling") {
  std::vector<double> p = {1.0};
  AdamState s(1);
  adam_step(p, std::vector<double>{0.0}, s, 0.1, 0.5);
  CHECK(p[0] < 1.0);  // decay alone moves towards zero

  std::vector<double> q = {1.0, 2.0};
  AdamState s2(2);
  CHECK_THROWS_AS(adam_step(q, std::vector<double>{1.0, NAN}, s2, 0.1, 0.0), NumericError);
  CHECK(q == std::vector<double>{1.0, 2.0});
  CHECK(s2.t == 0);
  CHECK_THROWS(adam_step(q, std::vector<double>{1.0}, s2, 0.1, 0.0));
}

TEST_CASE("adam trajectories are reproducible") {
  const auto run = [] {
    std::vector<double> p = {0.1, 0.2};
    AdamState s(2);
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> g = {std::sin(k * 0.3) + p[0], std::cos(k * 0.7) - p[1]};
      adam_step(p, g, s, 0.05, 1e-3);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("rop_update schedules") {
  SUBCASE("strictly decreasing loss never reduces") {
    RopState s = RopState::start(0.01, {.patience = 5, .factor = 0.25});
    for (int e = 0; e < 40; ++e) s = rop_update(s, 10.0 - 0.2 * e);
    CHECK(s.current_lr == 0.01);
  }
  SUBCASE("constant loss, patience 5, factor 0.25") {
    RopState s = RopState::start(0.01, {.patience = 5, .factor = 0.25});
    std::vector<double> lrs;
    for (int e = 0; e <= 10; ++e) {
      s = rop_update(s, 1.0);
      lrs.push_back(s.current_lr);
    }
    for (int e = 0; e < 5; ++e) CHECK(lrs[static_cast<std::size_t>(e)] == 0.01);
    CHECK(lrs[5] == 0.0025);
    CHECK(lrs[10] == 0.000625);
  }
  SUBCASE("factor ten from 0.128") {
    RopState s = RopState::start(0.128, {.patience = 5, .factor = 0.1});
    std::vector<double> lrs;
    for (int e = 0; e < 20; ++e) {
      s = rop_update(s, 3.0);
      lrs.push_back(s.current_lr);
    }
    CHECK(lrs[5] == doctest::Approx(0.0128).epsilon(1e-15));
    CHECK(lrs[10] == doctest::Approx(0.00128).epsilon(1e-15));
  }
  SUBCASE("floor at min_lr and monotone") {
    RopState s = RopState::start(1e-7, {.patience = 1, .factor = 0.5, .threshold = 1e-4, .min_lr = 1e-8});
    double prev = s.current_lr;
    for (int e = 0; e < 30; ++e) {
      s = rop_update(s, 1.0);
      CHECK(s.current_lr <= prev);
      CHECK(s.current_lr >= 1e-8);
      prev = s.current_lr;
    }
    CHECK(s.current_lr == 1e-8);
  }
  SUBCASE("improvement must beat the relative threshold") {
    RopState s = RopState::start(1.0, {.patience = 2, .factor = 0.5});
    s = rop_update(s, 1.0);
    s = rop_update(s, 0.99999);  // within 1e-4 relative: not an improvement
    CHECK(s.epochs_since_improvement == 1);
    s = rop_update(s, 0.5);
    CHECK(s.epochs_since_improvement == 0);
    CHECK(s.best_metric == 0.5);
  }
}

TEST_CASE("pair and general defaults") {
  const auto p = pair_train_defaults();
  CHECK(p.epochs == 30);
  CHECK(p.initial_lr == 1e-4);
  CHECK(p.rop.factor == 0.25);
  CHECK(p.rop.patience == 5);
  CHECK(p.weight_decay == 5e-4);
  CHECK(p.batch_size == 256);
  const auto g = general_train_defaults();
  CHECK(g.initial_lr == 0.01);
  CHECK(g.epochs == 40);
  CHECK(g.batch_size == 256);
}

TEST_CASE("train_general with zero epochs returns the initialised head") {
  const Dataset d = two_class(20, 4, 4.0, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train_general(d, d, cfg);
  CHECK(r.history.empty());
  CHECK(r.head.feature_dim() == 4);
}

TEST_CASE("train_general separates a 4-sigma two-class problem") {
  const Dataset all = two_class(1000, 16, 4.0, 21);
  const auto [train, val] = split(all, 0.8, 3);
  const std::uint64_t before = checksum(train);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 5;
  const auto r = train_general(train, val, cfg);
  CHECK(checksum(train) == before);
  REQUIRE(r.history.size() == 10);
  for (std::size_t e = 0; e < 10; ++e) {
    CHECK(r.history[e].epoch == e);
    CHECK(std::isfinite(r.history[e].train_loss));
    CHECK(std::isfinite(r.history[e].val_loss));
    if (e > 0) CHECK(r.history[e].lr <= r.history[e - 1].lr);
  }
  const double reference = nearest_mean_accuracy(train, val);
  CHECK(reference >= 0.97);
  CHECK(r.history.back().val_accuracy >= 0.99);
  CHECK(r.history.back().val_accuracy >= reference - 0.01);

  // Determinism: identical config and seed give identical histories.
  const auto again = train_general(train, val, cfg);
  CHECK(again.head == r.head);
  for (std::size_t e = 0; e < 10; ++e) CHECK(again.history[e].val_loss == r.history[e].val_loss);
}

TEST_CASE("train_general loss is eventually non-increasing (5-epoch moving average)") {
  const Dataset all = two_class(500, 8, 4.0, 33);
  const auto [train, val] = split(all, 0.8, 1);
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.seed = 2;
  const auto r = train_general(train, val, cfg);
  std::vector<double> avg;
  for (std::size_t e = 4; e < r.history.size(); ++e) {
    double s = 0.0;
    for (std::size_t k = e - 4; k <= e; ++k) s += r.history[k].train_loss;
    avg.push_back(s / 5.0);
  }
  for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] <= avg[i - 1] + 1e-12);
}

TEST_CASE("train_general with AAM, inverse-frequency sampling, Pearson and landmarks") {
  SynthesisConfig cfg;
  cfg.feature_dim = 8;
  cfg.seed = 4;
  cfg.landmark_dim = 4;
  const auto means = orthogonal_class_means(3, 8, 5.0, 2);
  cfg.classes = {{0, 300, means[0], 1.0}, {1, 60, means[1], 1.0}, {2, 30, means[2], 1.0}};
  const Dataset all = synthesize_dataset(cfg);
  const auto [train, val] = split(all, 0.8, 2);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 32;
  tc.sampler = InverseFrequencySampling{2.0};
  tc.loss.expression = ExpressionLossKind::Aam;
  tc.loss.aam = {16.0, 0.3};
  tc.loss.regression = RegressionLossKind::Pearson;
  const auto r = train_general(train, val, tc);
  CHECK(r.head.expression.normalized);
  CHECK(r.head.landmarks.has_value());
  CHECK(r.history.back().val_accuracy >= 0.95);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
}

TEST_CASE("train_general rejects bad input") {
  const Dataset d = two_class(10, 3, 4.0, 1);
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS(train_general(d, d, cfg));
  CHECK_THROWS_AS(train_general(d, Dataset{}, TrainConfig{}), DataError);
}

TEST_CASE("train_pairwise detached on separated classes") {
  const Dataset all = two_class(600, 8, 5.0, 7, 4, 7);
  const auto [train, val] = split(all, 0.75, 1);
  TrainConfig cfg = pair_train_defaults();
  cfg.initial_lr = 0.01;
  cfg.epochs = 10;
  const std::vector<PairKey> keys = {PairKey::of(4, 7)};
  const auto r = train_pairwise(train, keys, nullptr, cfg, PairMode::Detached, 1, &val);
  REQUIRE(r.dict.entries.size() == 1);
  CHECK(r.history.at(keys[0]).size() == 10);
  CHECK(r.history.at(keys[0]).back().val_accuracy >= 0.99);
  CHECK(r.skipped.empty());
}

TEST_CASE("train_pairwise bookkeeping") {
  const Dataset d = two_class(50, 4, 3.0, 9, 0, 1);
  TrainConfig cfg = pair_train_defaults();
  cfg.epochs = 2;

  SUBCASE("no keys") {
    const auto r = train_pairwise(d, {}, nullptr, cfg, PairMode::Detached);
    CHECK(r.dict.entries.empty());
  }
  SUBCASE("pairs with an empty class are skipped") {
    const std::vector<PairKey> keys = {PairKey::of(0, 1), PairKey::of(0, 5)};
    const auto r = train_pairwise(d, keys, nullptr, cfg, PairMode::Detached);
    CHECK(r.dict.entries.size() == 1);
    REQUIRE(r.skipped.size() == 1);
    CHECK(r.skipped[0] == PairKey::of(0, 5));
  }
  SUBCASE("stacked needs the general head") {
    const std::vector<PairKey> keys = {PairKey::of(0, 1)};
    CHECK_THROWS(train_pairwise(d, keys, nullptr, cfg, PairMode::Stacked));
    const auto general = init_multi_head({.feature_dim = 4, .landmark_dim = 0, .normalized_expression = false, .scale = 1.0, .seed = 1});
    const auto before = general;
    const auto r = train_pairwise(d, keys, &general, cfg, PairMode::Stacked);
    CHECK(r.dict.entries.at(keys[0]).in_dim() == 8);
    CHECK(general == before);
  }
  SUBCASE("thread count does not change results") {
    const auto keys = all_pairs();
    const auto one = train_pairwise(d, keys, nullptr, cfg, PairMode::Detached, 1);
    const auto four = train_pairwise(d, keys, nullptr, cfg, PairMode::Detached, 4);
    CHECK(one.dict == four.dict);
    CHECK(one.skipped == four.skipped);
    CHECK(one.dict.entries.size() == 1);
    CHECK(one.skipped.size() == 27);
  }
}

TEST_CASE("indistinguishable classes give chance-level pair accuracy") {
  SynthesisConfig cfg;
  cfg.feature_dim = 8;
  cfg.seed = 13;
  const std::vector<double> mean(8, 0.5);
  cfg.classes = {{2, 1500, mean, 1.0}, {3, 1500, mean, 1.0}};
  const Dataset train = synthesize_dataset(cfg);
  cfg.seed = 14;
  cfg.classes[0].count = cfg.classes[1].count = 1000;
  const Dataset test = synthesize_dataset(cfg);

  TrainConfig tc = pair_train_defaults();
  tc.initial_lr = 0.01;
  tc.epochs = 5;
  const PairKey key = PairKey::of(2, 3);
  const std::vector<PairKey> keys = {key};
  const auto r = train_pairwise(train, keys, nullptr, tc, PairMode::Detached);
  std::size_t correct = 0;
  for (const auto& rec : test) {
    if (pair_eval_dict(r.dict, nullptr, rec.features, key) == rec.expression) ++correct;
  }
  CHECK(std::abs(100.0 * static_cast<double>(correct) / static_cast<double>(test.size()) - 50.0) <= 3.0);
}
