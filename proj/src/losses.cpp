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

#include "ferpair/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ferpair {
namespace {

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
}

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
}

}  // namespace

void AamParams::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("AAM scale must be positive");
  }
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2)) {
    throw std::invalid_argument("AAM margin must lie in [0, pi/2)");
  }
}

LossOutput softmax_ce(std::span<const double> logits, std::size_t target) {
  const std::size_t n = logits.size();
  if (n < 2) throw std::invalid_argument("softmax_ce needs at least two classes");
  if (target >= n) throw std::invalid_argument("softmax_ce target out of range");
  for (double z : logits) require_finite(z, "softmax_ce logits");

  const std::size_t top = static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  const double zmax = logits[top];
  LossOutput out;
  out.grad.resize(n);
  double rest = 0.0;  // sum of exp(z_j - max) over j != top
  for (std::size_t j = 0; j < n; ++j) {
    out.grad[j] = std::exp(logits[j] - zmax);
    if (j != top) rest += out.grad[j];
  }
  const double total = 1.0 + rest;
  for (auto& g : out.grad) g /= total;
  // log(total) via log1p keeps precision when the top logit dominates.
  out.value = (zmax - logits[target]) + std::log1p(rest);
  out.grad[target] = target == top ? -rest / total : out.grad[target] - 1.0;
  return out;
}

std::vector<double> cosine_logits(std::span<const double> x, const Matrix& weights) {
  if (x.size() != weights.cols()) throw std::invalid_argument("cosine_logits: dimension mismatch");
  const double xn = norm2(x);
  if (!(xn > 0.0)) throw NumericError("cosine_logits: zero-norm feature vector");
  std::vector<double> out(weights.rows());
  for (std::size_t j = 0; j < weights.rows(); ++j) {
    const double wn = norm2(weights.row(j));
    if (!(wn > 0.0)) throw NumericError("cosine_logits: zero-norm weight row " + std::to_string(j));
    out[j] = std::clamp(dot(weights.row(j), x) / (wn * xn), -1.0, 1.0);
  }
  return out;
}

void cosine_logits_backward(std::span<const double> x, const Matrix& weights,
                            std::span<const double> cosines, std::span<const double> grad_cos,
                            std::span<double> grad_x, Matrix& grad_w) {
  const std::size_t d = x.size();
  const double xn = norm2(x);
  for (std::size_t j = 0; j < weights.rows(); ++j) {
    const double g = grad_cos[j];
    if (g == 0.0) continue;
    const auto w = weights.row(j);
    const double wn = norm2(w);
    const double c = cosines[j];
    auto gw = grad_w.row(j);
    for (std::size_t i = 0; i < d; ++i) {
      const double u = x[i] / xn;
      const double v = w[i] / wn;
      grad_x[i] += g * (v - c * u) / xn;
      gw[i] += g * (u - c * v) / wn;
    }
  }
}

LossOutput aam_loss_from_cosines(std::span<const double> cosines, std::size_t target,
                                 const AamParams& params) {
  params.validate();
  if (target >= cosines.size()) throw std::invalid_argument("aam_loss target out of range");
  const double s = params.scale;
  std::vector<double> logits(cosines.size());
  for (std::size_t j = 0; j < cosines.size(); ++j) logits[j] = s * cosines[j];

  double slope = 1.0;  // d cos(theta + m) / d cos(theta)
  if (params.margin != 0.0) {
    const double c = std::clamp(cosines[target], -1.0 + kCosineClamp, 1.0 - kCosineClamp);
    const double theta = std::acos(c);
    logits[target] = s * std::cos(theta + params.margin);
    slope = std::sin(theta + params.margin) / std::sin(theta);
  }

  LossOutput out = softmax_ce(logits, target);
  for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] *= s;
  out.grad[target] *= slope;
  require_finite(out.value, "aam_loss");
  return out;
}

AamOutput aam_loss(std::span<const double> x, const Matrix& weights, std::size_t target,
                   const AamParams& params) {
  const auto cos = cosine_logits(x, weights);
  const LossOutput inner = aam_loss_from_cosines(cos, target, params);
  AamOutput out;
  out.value = inner.value;
  out.grad_x.assign(x.size(), 0.0);
  out.grad_w = Matrix(weights.rows(), weights.cols());
  cosine_logits_backward(x, weights, cos, inner.grad, out.grad_x, out.grad_w);
  for (double g : out.grad_x) require_finite(g, "aam_loss gradient");
  return out;
}

LossOutput signed_mse(std::span<const double> pred, std::span<const double> target,
                      const SignedMseParams& params) {
  require_same_length(pred, target, "signed_mse");
  if (pred.empty()) throw std::invalid_argument("signed_mse: empty input");
  if (!(params.kappa >= 0.0)) throw std::invalid_argument("signed_mse: kappa must be >= 0");
  const double n = static_cast<double>(pred.size());
  LossOutput out;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    // sign(0) matches either sign, so only a strictly negative product counts.
    const double penalty = pred[i] * target[i] < 0.0 ? 1.0 + params.kappa : 1.0;
    out.value += diff * diff * penalty / n;
    out.grad[i] = 2.0 * diff * penalty / n;
  }
  require_finite(out.value, "signed_mse");
  return out;
}

LossOutput pearson_loss(std::span<const double> pred, std::span<const double> target) {
  require_same_length(pred, target, "pearson_loss");
  const std::size_t n = pred.size();
  if (n < 2) throw std::invalid_argument("pearson_loss needs at least two samples");

  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mt += target[i];
  }
  mp /= static_cast<double>(n);
  mt /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = pred[i] - mp;
    const double b = target[i] - mt;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }

  LossOutput out;
  out.grad.assign(n, 0.0);
  const double dof = static_cast<double>(n - 1);
  if (saa / dof < 1e-12 || sbb / dof < 1e-12) {
    out.value = 1.0;
    out.degenerate = true;
    return out;
  }
  const double denom = std::sqrt(saa * sbb);
  const double rho = std::clamp(sab / denom, -1.0, 1.0);
  out.value = 1.0 - rho;
  // The centering terms vanish because the deviations sum to zero.
  for (std::size_t i = 0; i < n; ++i) {
    const double a = pred[i] - mp;
    const double b = target[i] - mt;
    out.grad[i] = -(b / denom - rho * a / saa);
  }
  require_finite(out.value, "pearson_loss");
  return out;
}

std::string to_string(ExpressionLossKind kind) {
  return kind == ExpressionLossKind::Aam ? "aam" : "softmax";
}

std::string to_string(RegressionLossKind kind) {
  return kind == RegressionLossKind::Pearson ? "pearson" : "signed-mse";
}

CombinedLossOutput combined_loss(std::span<const HeadOutputs> outputs,
                                 std::span<const TargetBundle> targets,
                                 const LossSelection& selection) {
  if (outputs.size() != targets.size()) {
    throw std::invalid_argument("combined_loss: batch size mismatch");
  }
  if (outputs.empty()) throw std::invalid_argument("combined_loss: empty batch");
  const std::size_t n = outputs.size();
  const auto& w = selection.weights;

  CombinedLossOutput out;
  out.grad.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.grad[i].expression_logits.assign(outputs[i].expression_logits.size(), 0.0);
    out.grad[i].landmarks.assign(outputs[i].landmarks.size(), 0.0);
  }

  // Expression: batch mean of the per-sample loss.
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& logits = outputs[i].expression_logits;
    const auto target = static_cast<std::size_t>(targets[i].expression);
    LossOutput term;
    if (selection.expression == ExpressionLossKind::Aam) {
      // Logits are scale * cos; the cosine-space gradient divides back by scale.
      std::vector<double> cos(logits.size());
      for (std::size_t j = 0; j < logits.size(); ++j) {
        cos[j] = std::clamp(logits[j] / selection.aam.scale, -1.0, 1.0);
      }
      term = aam_loss_from_cosines(cos, target, selection.aam);
      for (auto& g : term.grad) g /= selection.aam.scale;
    } else {
      term = softmax_ce(logits, target);
    }
    out.expression += term.value * inv_n;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      out.grad[i].expression_logits[j] = w[0] * term.grad[j] * inv_n;
    }
  }

  const auto regress = [&](std::span<const double> pred, std::span<const double> target) {
    if (selection.regression == RegressionLossKind::Pearson) {
      if (pred.size() < 2) {
        LossOutput flat;
        flat.value = 1.0;
        flat.grad.assign(pred.size(), 0.0);
        flat.degenerate = true;
        return flat;
      }
      return pearson_loss(pred, target);
    }
    return signed_mse(pred, target, selection.signed_mse);
  };

  std::vector<double> pv(n), tv(n), pa(n), ta(n);
  for (std::size_t i = 0; i < n; ++i) {
    pv[i] = outputs[i].valence;
    tv[i] = targets[i].valence;
    pa[i] = outputs[i].arousal;
    ta[i] = targets[i].arousal;
  }
  const LossOutput val = regress(pv, tv);
  const LossOutput aro = regress(pa, ta);
  out.valence = val.value;
  out.arousal = aro.value;
  out.degenerate = val.degenerate || aro.degenerate;
  for (std::size_t i = 0; i < n; ++i) {
    out.grad[i].valence = w[1] * val.grad[i];
    out.grad[i].arousal = w[2] * aro.grad[i];
  }

  const std::size_t lm = outputs.front().landmarks.size();
  bool use_landmarks = lm > 0;
  for (std::size_t i = 0; i < n && use_landmarks; ++i) {
    use_landmarks = outputs[i].landmarks.size() == lm && targets[i].landmarks.size() == lm;
  }
  if (use_landmarks) {
    std::vector<double> pl, tl;
    pl.reserve(n * lm);
    tl.reserve(n * lm);
    for (std::size_t i = 0; i < n; ++i) {
      pl.insert(pl.end(), outputs[i].landmarks.begin(), outputs[i].landmarks.end());
      tl.insert(tl.end(), targets[i].landmarks.begin(), targets[i].landmarks.end());
    }
    const LossOutput lmk = regress(pl, tl);
    out.landmarks = lmk.value;
    out.landmarks_used = true;
    out.degenerate = out.degenerate || lmk.degenerate;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < lm; ++k) out.grad[i].landmarks[k] = w[3] * lmk.grad[i * lm + k];
    }
  }

  out.value = w[0] * out.expression + w[1] * out.valence + w[2] * out.arousal +
              (out.landmarks_used ? w[3] * out.landmarks : 0.0);
  require_finite(out.value, "combined_loss");
  return out;
}

}  // namespace ferpair
