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

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ferpair/datamodel.hpp"
#include "ferpair/heads.hpp"
#include "ferpair/losses.hpp"
#include "ferpair/sampling.hpp"

namespace ferpair {

// ---------------------------------------------------------------------------
// ADAM with classic L2 weight decay (added to the gradient).

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One ADAM update in place. Throws NumericError on a non-finite gradient,
/// leaving params and state untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double weight_decay);

// ---------------------------------------------------------------------------
// Reduce-on-plateau.

enum class RopMonitor { TrainLoss, ValLoss };

struct RopConfig {
  std::size_t patience = 5;
  double factor = 0.25;
  double threshold = 1e-4;  // relative
  double min_lr = 1e-8;
  RopMonitor monitor = RopMonitor::TrainLoss;
};

struct RopState {
  double current_lr = 0.0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::size_t patience = 5;
  double factor = 0.25;
  double threshold = 1e-4;
  double min_lr = 1e-8;

  static RopState start(double lr, const RopConfig& config);
};

/// A metric improves when it drops below best * (1 - threshold). After
/// `patience` consecutive non-improving epochs the rate is multiplied by
/// `factor` (floored at min_lr) and the counter restarts.
RopState rop_update(RopState state, double epoch_metric);

// ---------------------------------------------------------------------------
// Drivers.

struct TrainConfig {
  double initial_lr = 0.01;
  std::size_t epochs = 40;
  std::size_t batch_size = 256;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  SamplerVariant sampler = NaturalSampling{};
  LossSelection loss;
  RopConfig rop;

  void validate() const;
};

/// lr 0.01, 40 epochs, batch 256, wd 5e-4, ROP patience 5 / factor 0.25.
TrainConfig general_train_defaults();
/// 30 epochs, lr 1e-4, ROP patience 5 / factor 0.25, wd 5e-4, batch 256.
TrainConfig pair_train_defaults();

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // fraction over the sampled epoch
  double val_loss = 0.0;
  double val_accuracy = 0.0;    // fraction; NaN when no validation data
  double lr = 0.0;              // rate used during this epoch
};

struct GeneralTrainResult {
  MultiOutputHead head;
  std::vector<EpochRecord> history;
};

/// Trains every head of a fresh MultiOutputHead on frozen features. The
/// expression head is normalized when the loss selection is AAM.
GeneralTrainResult train_general(const Dataset& train, const Dataset& val,
                                 const TrainConfig& config);

struct EvalLoss {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Combined loss (batched like training) and 8-way accuracy.
EvalLoss evaluate_general(const MultiOutputHead& head, const Dataset& data,
                          const LossSelection& loss, std::size_t batch_size);

std::vector<int> predict_general(const MultiOutputHead& head, const Dataset& data);

struct PairTrainResult {
  PairwiseHeadDict dict;
  std::map<PairKey, std::vector<EpochRecord>> history;
  std::vector<PairKey> skipped;  // a class of the pair had no training data
};

/// Per-pair seed; independent of scheduling order.
std::uint64_t pair_seed(std::uint64_t base, PairKey key);

/// Trains one 2-way head per key with pair-balanced sampling and pair
/// cross-entropy. `general` is required (and stays frozen) in Stacked mode.
/// Pairs are independent and run on up to `jobs` threads. `val` is optional.
PairTrainResult train_pairwise(const Dataset& train, std::span<const PairKey> keys,
                               const MultiOutputHead* general, const TrainConfig& config,
                               PairMode mode, std::size_t jobs = 1,
                               const Dataset* val = nullptr);

}  // namespace ferpair
