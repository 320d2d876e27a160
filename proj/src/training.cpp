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

#include "ferpair/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <stdexcept>
#include <thread>

#include "ferpair/random.hpp"

namespace ferpair {
namespace {

constexpr std::uint64_t kInitTag = 0x494e4954;  // "INIT"

/// Optimizer state for one LinearHead.
struct HeadOptimizer {
  AdamState weights;
  AdamState bias;

  explicit HeadOptimizer(const LinearHead& head)
      : weights(head.weights.size()), bias(head.bias.size()) {}

  void step(LinearHead& head, const LinearHead& grad, double lr, double weight_decay) {
    adam_step(head.weights.flat(), grad.weights.flat(), weights, lr, weight_decay);
    if (head.has_bias()) adam_step(head.bias, grad.bias, bias, lr, weight_decay);
  }
};

TargetBundle target_of(const FeatureRecord& r) {
  return {r.expression, r.valence, r.arousal, r.landmarks};
}

std::string where(std::size_t epoch, std::size_t batch) {
  return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": ";
}

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch_size, Fn&& fn) {
  std::size_t b = 0;
  for (std::size_t start = 0; start < n; start += batch_size, ++b) {
    fn(b, start, std::min(n, start + batch_size));
  }
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double weight_decay) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

RopState RopState::start(double lr, const RopConfig& config) {
  RopState s;
  s.current_lr = lr;
  s.patience = config.patience;
  s.factor = config.factor;
  s.threshold = config.threshold;
  s.min_lr = config.min_lr;
  return s;
}

RopState rop_update(RopState state, double epoch_metric) {
  if (!std::isfinite(epoch_metric)) throw NumericError("rop_update: non-finite metric");
  if (epoch_metric < state.best_metric * (1.0 - state.threshold)) {
    state.best_metric = epoch_metric;
    state.epochs_since_improvement = 0;
    return state;
  }
  if (++state.epochs_since_improvement >= state.patience) {
    state.current_lr = std::max(state.current_lr * state.factor, state.min_lr);
    state.epochs_since_improvement = 0;
  }
  return state;
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
  if (!(rop.factor > 0.0 && rop.factor < 1.0)) throw std::invalid_argument("ROP factor must lie in (0, 1)");
  if (rop.patience == 0) throw std::invalid_argument("ROP patience must be positive");
  if (const auto* inv = std::get_if<InverseFrequencySampling>(&sampler)) {
    if (!(inv->cap_multiplier > 0.0)) throw std::invalid_argument("cap multiplier must be positive");
  }
  if (loss.expression == ExpressionLossKind::Aam) loss.aam.validate();
  if (!(loss.signed_mse.kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
}

TrainConfig general_train_defaults() { return TrainConfig{}; }

TrainConfig pair_train_defaults() {
  TrainConfig c;
  c.initial_lr = 1e-4;
  c.epochs = 30;
  c.batch_size = 256;
  c.weight_decay = 5e-4;
  c.rop.patience = 5;
  c.rop.factor = 0.25;
  return c;
}

std::vector<int> predict_general(const MultiOutputHead& head, const Dataset& data) {
  std::vector<int> preds;
  preds.reserve(data.size());
  for (const auto& r : data) preds.push_back(argmax(head.expression.forward(r.features)));
  return preds;
}

EvalLoss evaluate_general(const MultiOutputHead& head, const Dataset& data,
                          const LossSelection& loss, std::size_t batch_size) {
  EvalLoss out;
  if (data.empty()) {
    out.loss = std::numeric_limits<double>::quiet_NaN();
    out.accuracy = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::size_t correct = 0;
  double weighted = 0.0;
  for_each_batch(data.size(), batch_size, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<HeadOutputs> outputs;
    std::vector<TargetBundle> targets;
    for (std::size_t i = lo; i < hi; ++i) {
      outputs.push_back(forward_general(head, data[i].features));
      targets.push_back(target_of(data[i]));
      if (argmax(outputs.back().expression_logits) == data[i].expression) ++correct;
    }
    weighted += combined_loss(outputs, targets, loss).value * static_cast<double>(hi - lo);
  });
  out.loss = weighted / static_cast<double>(data.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return out;
}

GeneralTrainResult train_general(const Dataset& train, const Dataset& val,
                                 const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("training set is empty");
  if (val.empty()) throw DataError("validation set is empty");
  if (val.feature_dim() != train.feature_dim()) {
    throw DataError("train/validation feature dimensions differ");
  }
  const bool aam = config.loss.expression == ExpressionLossKind::Aam;

  GeneralTrainResult result;
  result.head = init_multi_head({.feature_dim = train.feature_dim(),
                                 .landmark_dim = train.landmark_dim(),
                                 .normalized_expression = aam,
                                 .scale = config.loss.aam.scale,
                                 .seed = derive_seed(config.seed, {kInitTag})});
  MultiOutputHead& head = result.head;

  HeadOptimizer opt_expr(head.expression), opt_val(head.valence), opt_aro(head.arousal);
  std::optional<HeadOptimizer> opt_lm;
  if (head.landmarks) opt_lm.emplace(*head.landmarks);

  const auto labels = train.labels();
  RopState rop = RopState::start(config.initial_lr, config.rop);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = draw_epoch(std::span<const int>(labels),
                                  {config.sampler, derive_seed(config.seed, {epoch})});
    const double lr = rop.current_lr;
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for_each_batch(order.size(), config.batch_size, [&](std::size_t b, std::size_t lo, std::size_t hi) {
      std::vector<HeadOutputs> outputs;
      std::vector<TargetBundle> targets;
      outputs.reserve(hi - lo);
      targets.reserve(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& rec = train[order[k]];
        outputs.push_back(forward_general(head, rec.features));
        targets.push_back(target_of(rec));
        if (argmax(outputs.back().expression_logits) == rec.expression) ++correct;
      }
      try {
        const CombinedLossOutput loss = combined_loss(outputs, targets, config.loss);
        MultiOutputHead grad = zeros_like(head);
        for (std::size_t k = lo; k < hi; ++k) {
          backward_general(head, train[order[k]].features, outputs[k - lo], loss.grad[k - lo], grad);
        }
        opt_expr.step(head.expression, grad.expression, lr, config.weight_decay);
        opt_val.step(head.valence, grad.valence, lr, config.weight_decay);
        opt_aro.step(head.arousal, grad.arousal, lr, config.weight_decay);
        if (opt_lm) opt_lm->step(*head.landmarks, *grad.landmarks, lr, config.weight_decay);
        loss_sum += loss.value * static_cast<double>(hi - lo);
      } catch (const NumericError& e) {
        throw NumericError(where(epoch, b) + e.what());
      }
    });

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const EvalLoss v = evaluate_general(head, val, config.loss, config.batch_size);
    rec.val_loss = v.loss;
    rec.val_accuracy = v.accuracy;
    result.history.push_back(rec);

    rop = rop_update(rop, config.rop.monitor == RopMonitor::ValLoss ? rec.val_loss : rec.train_loss);
  }
  return result;
}

std::uint64_t pair_seed(std::uint64_t base, PairKey key) {
  return derive_seed(base, {static_cast<std::uint64_t>(key.lo), static_cast<std::uint64_t>(key.hi)});
}

namespace {

struct PairJobResult {
  std::optional<LinearHead> head;
  std::vector<EpochRecord> history;
};

// Pair inputs: general logits in Stacked mode, raw features otherwise.
std::vector<std::vector<double>> pair_inputs(const Dataset& data, const MultiOutputHead* general,
                                             PairMode mode) {
  std::vector<std::vector<double>> inputs;
  inputs.reserve(data.size());
  for (const auto& r : data) {
    inputs.push_back(mode == PairMode::Stacked ? general->expression.forward(r.features) : r.features);
  }
  return inputs;
}

EvalLoss evaluate_pair(const LinearHead& head, const std::vector<std::vector<double>>& inputs,
                       const std::vector<int>& labels, PairKey key) {
  EvalLoss out;
  if (inputs.empty()) {
    out.loss = out.accuracy = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto logits = head.forward(inputs[i]);
    const std::size_t target = labels[i] == key.hi ? 1 : 0;
    out.loss += softmax_ce(logits, target).value;
    const int pred = logits[1] > logits[0] ? key.hi : key.lo;
    if (pred == labels[i]) ++correct;
  }
  out.loss /= static_cast<double>(inputs.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
  return out;
}

PairJobResult train_one_pair(const Dataset& train, PairKey key, const MultiOutputHead* general,
                             const TrainConfig& config, PairMode mode, const Dataset* val) {
  PairJobResult result;
  const Dataset view = pair_view(train, key);
  const auto& counts = view.class_counts();
  if (counts[static_cast<std::size_t>(key.lo)] == 0 || counts[static_cast<std::size_t>(key.hi)] == 0) {
    return result;
  }
  const std::uint64_t seed = pair_seed(config.seed, key);
  const auto inputs = pair_inputs(view, general, mode);
  const auto labels = view.labels();

  std::vector<std::vector<double>> val_inputs;
  std::vector<int> val_labels;
  if (val != nullptr) {
    const Dataset val_view = pair_view(*val, key);
    val_inputs = pair_inputs(val_view, general, mode);
    val_labels = val_view.labels();
  }

  const std::size_t in_dim = mode == PairMode::Stacked ? kNumClasses : train.feature_dim();
  LinearHead head = init_head(2, in_dim, derive_seed(seed, {kInitTag}));
  HeadOptimizer opt(head);
  RopState rop = RopState::start(config.initial_lr, config.rop);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = draw_epoch(std::span<const int>(labels),
                                  {PairBalancedSampling{key}, derive_seed(seed, {epoch})});
    const double lr = rop.current_lr;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for_each_batch(order.size(), config.batch_size, [&](std::size_t b, std::size_t lo, std::size_t hi) {
      LinearHead grad = head.zeros_like();
      const double inv_n = 1.0 / static_cast<double>(hi - lo);
      try {
        for (std::size_t k = lo; k < hi; ++k) {
          const auto& x = inputs[order[k]];
          const int label = labels[order[k]];
          const auto logits = head.forward(x);
          auto term = softmax_ce(logits, label == key.hi ? 1 : 0);
          loss_sum += term.value;
          if ((logits[1] > logits[0] ? key.hi : key.lo) == label) ++correct;
          for (auto& g : term.grad) g *= inv_n;
          head.backward(x, term.grad, grad);
        }
        opt.step(head, grad, lr, config.weight_decay);
      } catch (const NumericError& e) {
        throw NumericError(key.name() + ", " + where(epoch, b) + e.what());
      }
    });

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    const EvalLoss v = evaluate_pair(head, val_inputs, val_labels, key);
    rec.val_loss = v.loss;
    rec.val_accuracy = v.accuracy;
    result.history.push_back(rec);

    const bool use_val = config.rop.monitor == RopMonitor::ValLoss && !val_inputs.empty();
    rop = rop_update(rop, use_val ? rec.val_loss : rec.train_loss);
  }
  result.head = std::move(head);
  return result;
}

}  // namespace

PairTrainResult train_pairwise(const Dataset& train, std::span<const PairKey> keys,
                               const MultiOutputHead* general, const TrainConfig& config,
                               PairMode mode, std::size_t jobs, const Dataset* val) {
  config.validate();
  if (mode == PairMode::Stacked) {
    if (general == nullptr) throw std::invalid_argument("stacked pair training needs the general head");
    if (general->feature_dim() != train.feature_dim()) {
      throw DataError("general head and training data disagree on feature dimension");
    }
  }

  std::vector<PairJobResult> results(keys.size());
  std::vector<std::exception_ptr> errors(keys.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        results[i] = train_one_pair(train, keys[i], general, config, mode, val);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(keys.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PairTrainResult out;
  out.dict.mode = mode;
  out.dict.feature_dim = train.feature_dim();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!results[i].head) {
      out.skipped.push_back(keys[i]);
      continue;
    }
    out.dict.entries[keys[i]] = std::move(*results[i].head);
    out.history[keys[i]] = std::move(results[i].history);
  }
  return out;
}

}  // namespace ferpair
