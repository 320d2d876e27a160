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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ferpair/datamodel.hpp"
#include "ferpair/losses.hpp"
#include "ferpair/matrix.hpp"

namespace ferpair {

/// Fully connected layer over a fixed input. Plain heads compute W x + b;
/// normalized heads compute scale * cos(theta_j) and carry no bias.
struct LinearHead {
  Matrix weights;             // out x in
  std::vector<double> bias;   // empty when absent
  bool normalized = false;
  double scale = 1.0;         // only used when normalized

  std::size_t out_dim() const noexcept { return weights.rows(); }
  std::size_t in_dim() const noexcept { return weights.cols(); }
  bool has_bias() const noexcept { return !bias.empty(); }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

  std::vector<double> forward(std::span<const double> x) const;

  /// Accumulates dL/dW and dL/db for one input into `grad`, which must be
  /// shaped like this head. Returns nothing about dL/dx; heads sit on a
  /// frozen input.
  void backward(std::span<const double> x, std::span<const double> grad_out,
                LinearHead& grad) const;

  /// Same-shape head with all parameters zero.
  LinearHead zeros_like() const;

  /// Throws std::invalid_argument when fields disagree with each other.
  void validate() const;

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

struct HeadInit {
  bool bias = true;
  bool normalized = false;
  double scale = 1.0;
  /// Half-width of the uniform init range; defaults to 1/sqrt(in).
  std::optional<double> range;
};

/// Uniform [-a, a] weights, zero bias, deterministic in `seed`.
LinearHead init_head(std::size_t out, std::size_t in, std::uint64_t seed, const HeadInit& init = {});

/// Expression, valence, arousal and optional landmark heads over the same
/// frozen feature vector.
struct MultiOutputHead {
  LinearHead expression;
  LinearHead valence;
  LinearHead arousal;
  std::optional<LinearHead> landmarks;

  std::size_t feature_dim() const noexcept { return expression.in_dim(); }
  void validate() const;

  friend bool operator==(const MultiOutputHead&, const MultiOutputHead&) = default;
};

struct MultiHeadInit {
  std::size_t feature_dim = 0;
  std::size_t landmark_dim = 0;  // 0 omits the landmark head
  /// Normalized expression head (AAM); otherwise plain with bias.
  bool normalized_expression = false;
  double scale = 64.0;
  std::uint64_t seed = 0;
};

MultiOutputHead init_multi_head(const MultiHeadInit& init);

/// Valence and arousal are squashed with tanh; landmarks stay affine.
HeadOutputs forward_general(const MultiOutputHead& head, std::span<const double> x);

/// Parameter gradients of every head for one sample, given dL/d(outputs).
void backward_general(const MultiOutputHead& head, std::span<const double> x,
                      const HeadOutputs& outputs, const HeadOutputs& grad_outputs,
                      MultiOutputHead& grad);

MultiOutputHead zeros_like(const MultiOutputHead& head);

/// argmax with ties going to the lower index.
int argmax(std::span<const double> values);

/// Restricted argmax over the pair's two entries of the 8-way logits.
int pair_eval_general(const MultiOutputHead& general, std::span<const double> x, PairKey key);
int pair_predict(std::span<const double> expression_logits, PairKey key);

enum class PairMode { Stacked, Detached };
std::string to_string(PairMode mode);
PairMode parse_pair_mode(std::string_view text);

/// One 2-way head per class pair. Stacked heads read the general head's raw
/// expression logits (8 inputs); detached heads read the features directly.
struct PairwiseHeadDict {
  PairMode mode = PairMode::Detached;
  std::size_t feature_dim = 0;
  std::map<PairKey, LinearHead> entries;

  std::size_t input_dim() const noexcept {
    return mode == PairMode::Stacked ? kNumClasses : feature_dim;
  }
  bool contains(PairKey key) const { return entries.contains(key); }
  void validate() const;

  friend bool operator==(const PairwiseHeadDict&, const PairwiseHeadDict&) = default;
};

/// Index 0 of the result belongs to key.lo, index 1 to key.hi.
std::vector<double> forward_pair(const PairwiseHeadDict& dict, const MultiOutputHead* general,
                                 std::span<const double> x, PairKey key);

/// Class predicted by the pair head; ties go to key.lo.
int pair_eval_dict(const PairwiseHeadDict& dict, const MultiOutputHead* general,
                   std::span<const double> x, PairKey key);

}  // namespace ferpair
