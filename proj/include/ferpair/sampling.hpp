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
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ferpair/datamodel.hpp"

namespace ferpair {

struct NaturalSampling {};

/// Weighted random sampling with replacement, per-record probability
/// proportional to 1/class_count. An epoch holds
/// cap_multiplier * smallest_present_class * present_classes draws.
struct InverseFrequencySampling {
  double cap_multiplier = 2.0;
};

/// Exactly min(n_lo, n_hi) records from each class of the pair, shuffled.
struct PairBalancedSampling {
  PairKey key;
};

using SamplerVariant = std::variant<NaturalSampling, InverseFrequencySampling, PairBalancedSampling>;

struct SamplerSpec {
  SamplerVariant variant = NaturalSampling{};
  std::uint64_t seed = 0;
};

std::string sampler_name(const SamplerVariant& variant);

/// weight[c] = 1 / counts[c] for present classes, 0 for absent ones.
std::array<double, kNumClasses> inverse_frequency_weights(const ClassCounts& counts);

/// Number of draws an InverseFrequency epoch performs for these counts.
std::size_t inverse_frequency_epoch_size(const ClassCounts& counts, double cap_multiplier);

/// `n_draws` indices into `labels`, with replacement, per-index probability
/// proportional to 1/count(label). A draw picks a present class uniformly and
/// then a record of that class uniformly, which is the same distribution.
std::vector<std::size_t> draw_inverse_frequency(std::span<const int> labels, std::size_t n_draws,
                                                std::uint64_t seed);

std::vector<std::size_t> draw_epoch(const Dataset& dataset, const SamplerSpec& spec);
std::vector<std::size_t> draw_epoch(std::span<const int> labels, const SamplerSpec& spec);

}  // namespace ferpair
