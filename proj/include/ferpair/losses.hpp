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

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ferpair/matrix.hpp"

namespace ferpair {

/// Raised when a loss or gradient turns non-finite, or inputs are unusable
/// for a numeric reason (zero-norm vectors).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;
  /// Set by pearson_loss when a batch has (near) zero variance.
  bool degenerate = false;
};

/// Additive angular margin parameters. `scale` is the hypersphere radius s,
/// `margin` the angle m in radians added to the target class.
struct AamParams {
  double scale = 64.0;
  double margin = 0.5;

  void validate() const;
};

struct SignedMseParams {
  /// Extra multiplier applied to squared errors whose sign disagrees with
  /// the target. kappa = 0 is plain MSE.
  double kappa = 1.0;
};

/// Cosines are clamped to this band before arccos.
inline constexpr double kCosineClamp = 1e-7;

/// -log softmax(logits)[target], max-shifted. grad = softmax - one_hot.
LossOutput softmax_ce(std::span<const double> logits, std::size_t target);

/// cos(theta_j) between x and each row of W, clamped to [-1, 1].
std::vector<double> cosine_logits(std::span<const double> x, const Matrix& weights);

/// Backpropagates dL/dcos through the normalization. Adds into grad_x
/// (length D) and grad_w (C x D).
void cosine_logits_backward(std::span<const double> x, const Matrix& weights,
                            std::span<const double> cosines, std::span<const double> grad_cos,
                            std::span<double> grad_x, Matrix& grad_w);

/// AAM loss given the cosines; grad is with respect to the cosines.
LossOutput aam_loss_from_cosines(std::span<const double> cosines, std::size_t target,
                                 const AamParams& params);

struct AamOutput {
  double value = 0.0;
  std::vector<double> grad_x;
  Matrix grad_w;
};

AamOutput aam_loss(std::span<const double> x, const Matrix& weights, std::size_t target,
                   const AamParams& params);

LossOutput signed_mse(std::span<const double> pred, std::span<const double> target,
                      const SignedMseParams& params = {});

/// 1 - Pearson correlation over the batch.
LossOutput pearson_loss(std::span<const double> pred, std::span<const double> target);

// ---------------------------------------------------------------------------
// Four-head loss.

struct HeadOutputs {
  std::vector<double> expression_logits;
  double valence = 0.0;
  double arousal = 0.0;
  std::vector<double> landmarks;  // empty when the head is absent
};

struct TargetBundle {
  int expression = 0;
  double valence = 0.0;
  double arousal = 0.0;
  std::vector<double> landmarks;  // empty when unannotated
};

enum class ExpressionLossKind { SoftmaxCe, Aam };
enum class RegressionLossKind { SignedMse, Pearson };

std::string to_string(ExpressionLossKind kind);
std::string to_string(RegressionLossKind kind);

struct LossSelection {
  ExpressionLossKind expression = ExpressionLossKind::SoftmaxCe;
  /// Used when expression == Aam. Logits are then read as scale * cos.
  AamParams aam;
  RegressionLossKind regression = RegressionLossKind::SignedMse;
  SignedMseParams signed_mse;
  /// expression, valence, arousal, landmarks
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};
};

struct CombinedLossOutput {
  double value = 0.0;
  // Unweighted per-head terms.
  double expression = 0.0;
  double valence = 0.0;
  double arousal = 0.0;
  double landmarks = 0.0;
  bool landmarks_used = false;
  bool degenerate = false;
  /// dL/d(outputs), same shape as the input batch.
  std::vector<HeadOutputs> grad;
};

/// Weighted sum of the four head losses over a batch. The expression term is
/// the batch mean of the per-sample classification loss; regression terms
/// are taken over the batch vectors. The landmark term is skipped unless
/// every output and target carries landmarks.
CombinedLossOutput combined_loss(std::span<const HeadOutputs> outputs,
                                 std::span<const TargetBundle> targets,
                                 const LossSelection& selection);

}  // namespace ferpair
