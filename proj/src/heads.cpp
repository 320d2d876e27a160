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

#include "ferpair/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ferpair/random.hpp"

namespace ferpair {

std::vector<double> LinearHead::forward(std::span<const double> x) const {
  if (x.size() != in_dim()) {
    throw std::invalid_argument("head input has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(in_dim()));
  }
  if (normalized) {
    auto out = cosine_logits(x, weights);
    for (auto& v : out) v *= scale;
    return out;
  }
  std::vector<double> out(out_dim());
  for (std::size_t j = 0; j < out_dim(); ++j) {
    out[j] = dot(weights.row(j), x) + (has_bias() ? bias[j] : 0.0);
  }
  return out;
}

void LinearHead::backward(std::span<const double> x, std::span<const double> grad_out,
                          LinearHead& grad) const {
  if (normalized) {
    const auto cos = cosine_logits(x, weights);
    std::vector<double> grad_cos(grad_out.begin(), grad_out.end());
    for (auto& g : grad_cos) g *= scale;
    std::vector<double> unused(x.size(), 0.0);
    cosine_logits_backward(x, weights, cos, grad_cos, unused, grad.weights);
    return;
  }
  for (std::size_t j = 0; j < out_dim(); ++j) {
    const double g = grad_out[j];
    if (g == 0.0) continue;
    auto row = grad.weights.row(j);
    for (std::size_t i = 0; i < x.size(); ++i) row[i] += g * x[i];
    if (has_bias()) grad.bias[j] += g;
  }
}

LinearHead LinearHead::zeros_like() const {
  LinearHead z;
  z.weights = Matrix(weights.rows(), weights.cols());
  z.bias.assign(bias.size(), 0.0);
  z.normalized = normalized;
  z.scale = scale;
  return z;
}

void LinearHead::validate() const {
  if (weights.rows() == 0 || weights.cols() == 0) throw std::invalid_argument("empty head");
  if (!bias.empty() && bias.size() != weights.rows()) {
    throw std::invalid_argument("bias length does not match head output");
  }
  if (normalized && !bias.empty()) throw std::invalid_argument("normalized head with bias");
  if (normalized && !(scale > 0.0)) throw std::invalid_argument("normalized head needs scale > 0");
}

LinearHead init_head(std::size_t out, std::size_t in, std::uint64_t seed, const HeadInit& init) {
  if (out == 0 || in == 0) throw std::invalid_argument("init_head: dimensions must be >= 1");
  const double a = init.range.value_or(1.0 / std::sqrt(static_cast<double>(in)));
  LinearHead head;
  head.weights = Matrix(out, in);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-a, a);
  for (auto& w : head.weights.flat()) w = unit(rng);
  head.normalized = init.normalized;
  head.scale = init.normalized ? init.scale : 1.0;
  if (init.bias && !init.normalized) head.bias.assign(out, 0.0);
  return head;
}

void MultiOutputHead::validate() const {
  expression.validate();
  valence.validate();
  arousal.validate();
  const std::size_t d = expression.in_dim();
  if (expression.out_dim() != kNumClasses) throw std::invalid_argument("expression head must be 8-way");
  if (valence.out_dim() != 1 || arousal.out_dim() != 1) {
    throw std::invalid_argument("valence/arousal heads must be scalar");
  }
  if (valence.in_dim() != d || arousal.in_dim() != d) {
    throw std::invalid_argument("heads disagree on feature dimension");
  }
  if (landmarks) {
    landmarks->validate();
    if (landmarks->in_dim() != d) throw std::invalid_argument("landmark head dimension mismatch");
  }
}

MultiOutputHead init_multi_head(const MultiHeadInit& init) {
  const std::size_t d = init.feature_dim;
  MultiOutputHead head;
  head.expression = init_head(kNumClasses, d, derive_seed(init.seed, {0}),
                              {.bias = true, .normalized = init.normalized_expression, .scale = init.scale, .range = std::nullopt});
  head.valence = init_head(1, d, derive_seed(init.seed, {1}));
  head.arousal = init_head(1, d, derive_seed(init.seed, {2}));
  if (init.landmark_dim > 0) head.landmarks = init_head(init.landmark_dim, d, derive_seed(init.seed, {3}));
  return head;
}

HeadOutputs forward_general(const MultiOutputHead& head, std::span<const double> x) {
  HeadOutputs out;
  out.expression_logits = head.expression.forward(x);
  out.valence = std::tanh(head.valence.forward(x)[0]);
  out.arousal = std::tanh(head.arousal.forward(x)[0]);
  if (head.landmarks) out.landmarks = head.landmarks->forward(x);
  return out;
}

void backward_general(const MultiOutputHead& head, std::span<const double> x,
                      const HeadOutputs& outputs, const HeadOutputs& grad_outputs,
                      MultiOutputHead& grad) {
  head.expression.backward(x, grad_outputs.expression_logits, grad.expression);
  // d tanh(a)/da = 1 - tanh(a)^2
  const double gv = grad_outputs.valence * (1.0 - outputs.valence * outputs.valence);
  const double ga = grad_outputs.arousal * (1.0 - outputs.arousal * outputs.arousal);
  head.valence.backward(x, std::span<const double>(&gv, 1), grad.valence);
  head.arousal.backward(x, std::span<const double>(&ga, 1), grad.arousal);
  if (head.landmarks && !grad_outputs.landmarks.empty()) {
    head.landmarks->backward(x, grad_outputs.landmarks, *grad.landmarks);
  }
}

MultiOutputHead zeros_like(const MultiOutputHead& head) {
  MultiOutputHead z;
  z.expression = head.expression.zeros_like();
  z.valence = head.valence.zeros_like();
  z.arousal = head.arousal.zeros_like();
  if (head.landmarks) z.landmarks = head.landmarks->zeros_like();
  return z;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = j;
  }
  return static_cast<int>(best);
}

int pair_predict(std::span<const double> expression_logits, PairKey key) {
  const auto lo = static_cast<std::size_t>(key.lo);
  const auto hi = static_cast<std::size_t>(key.hi);
  if (hi >= expression_logits.size()) throw std::invalid_argument("pair outside logits");
  return expression_logits[hi] > expression_logits[lo] ? key.hi : key.lo;
}

int pair_eval_general(const MultiOutputHead& general, std::span<const double> x, PairKey key) {
  return pair_predict(general.expression.forward(x), key);
}

std::string to_string(PairMode mode) { return mode == PairMode::Stacked ? "stacked" : "detached"; }

PairMode parse_pair_mode(std::string_view text) {
  if (text == "stacked") return PairMode::Stacked;
  if (text == "detached") return PairMode::Detached;
  throw std::invalid_argument("pair mode must be 'stacked' or 'detached', got '" +
                              std::string(text) + "'");
}

void PairwiseHeadDict::validate() const {
  if (entries.size() > all_pairs().size()) throw std::invalid_argument("more than 28 pair heads");
  for (const auto& [key, head] : entries) {
    head.validate();
    if (head.out_dim() != 2 || head.in_dim() != input_dim()) {
      throw std::invalid_argument("pair head " + key.name() + " has the wrong shape for mode " +
                                  to_string(mode));
    }
  }
}

std::vector<double> forward_pair(const PairwiseHeadDict& dict, const MultiOutputHead* general,
                                 std::span<const double> x, PairKey key) {
  const auto it = dict.entries.find(key);
  if (it == dict.entries.end()) {
    throw std::out_of_range("no pair head for " + key.name());
  }
  if (dict.mode == PairMode::Stacked) {
    if (general == nullptr) throw std::invalid_argument("stacked pair heads need the general head");
    return it->second.forward(general->expression.forward(x));
  }
  return it->second.forward(x);
}

int pair_eval_dict(const PairwiseHeadDict& dict, const MultiOutputHead* general,
                   std::span<const double> x, PairKey key) {
  const auto logits = forward_pair(dict, general, x, key);
  return logits[1] > logits[0] ? key.hi : key.lo;
}

}  // namespace ferpair
