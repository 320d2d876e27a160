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

// Test-only reference computations. Nothing here calls into the gradient
// code it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ferpair::testing {

inline constexpr double kFdStep = 1e-5;

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double h = kFdStep) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, tiny).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

/// Pearson chi-square statistic against equal expected counts.
inline double chi_square_uniform(std::span<const std::size_t> observed) {
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  const double expected = total / static_cast<double>(observed.size());
  double stat = 0.0;
  for (auto o : observed) {
    const double d = static_cast<double>(o) - expected;
    stat += d * d / expected;
  }
  return stat;
}

/// Upper 0.001 quantile of chi-square with 7 degrees of freedom
/// (scipy.stats.chi2.ppf(0.999, 7)).
inline constexpr double kChiSquare7At001 = 24.321886347856854;

}  // namespace ferpair::testing
