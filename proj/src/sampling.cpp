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

#include "ferpair/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ferpair/random.hpp"

namespace ferpair {
namespace {

ClassCounts count_labels(std::span<const int> labels) {
  ClassCounts counts{};
  for (int l : labels) {
    if (l < 0 || l >= static_cast<int>(kNumClasses)) throw DataError("label outside 0..7");
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

std::array<std::vector<std::size_t>, kNumClasses> group_by_class(std::span<const int> labels) {
  std::array<std::vector<std::size_t>, kNumClasses> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return groups;
}

}  // namespace

std::string sampler_name(const SamplerVariant& variant) {
  struct Visitor {
    std::string operator()(const NaturalSampling&) const { return "natural"; }
    std::string operator()(const InverseFrequencySampling&) const { return "inverse-frequency"; }
    std::string operator()(const PairBalancedSampling& p) const {
      return "pair-balanced(" + p.key.slug() + ")";
    }
  };
  return std::visit(Visitor{}, variant);
}

std::array<double, kNumClasses> inverse_frequency_weights(const ClassCounts& counts) {
  std::array<double, kNumClasses> w{};
  bool any = false;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] > 0) {
      w[c] = 1.0 / static_cast<double>(counts[c]);
      any = true;
    }
  }
  if (!any) throw DataError("inverse-frequency weights need at least one non-empty class");
  return w;
}

std::size_t inverse_frequency_epoch_size(const ClassCounts& counts, double cap_multiplier) {
  if (!(cap_multiplier > 0.0)) throw DataError("cap multiplier must be positive");
  std::size_t smallest = 0;
  std::size_t present = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    smallest = present == 0 ? c : std::min(smallest, c);
    ++present;
  }
  if (present == 0) throw DataError("inverse-frequency sampling over an empty dataset");
  return static_cast<std::size_t>(
      std::floor(cap_multiplier * static_cast<double>(smallest) * static_cast<double>(present)));
}

std::vector<std::size_t> draw_inverse_frequency(std::span<const int> labels, std::size_t n_draws,
                                                std::uint64_t seed) {
  count_labels(labels);
  const auto groups = group_by_class(labels);
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!groups[c].empty()) present.push_back(c);
  }
  if (present.empty()) throw DataError("inverse-frequency sampling over an empty dataset");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_class(0, present.size() - 1);
  std::vector<std::size_t> out;
  out.reserve(n_draws);
  for (std::size_t k = 0; k < n_draws; ++k) {
    const auto& members = groups[present[pick_class(rng)]];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    out.push_back(members[pick(rng)]);
  }
  return out;
}

std::vector<std::size_t> draw_epoch(std::span<const int> labels, const SamplerSpec& spec) {
  if (labels.empty()) throw DataError("cannot sample from an empty dataset");
  const ClassCounts counts = count_labels(labels);

  struct Visitor {
    std::span<const int> labels;
    const ClassCounts& counts;
    std::uint64_t seed;

    std::vector<std::size_t> operator()(const NaturalSampling&) const {
      std::vector<std::size_t> idx(labels.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      Rng rng(seed);
      std::shuffle(idx.begin(), idx.end(), rng);
      return idx;
    }

    std::vector<std::size_t> operator()(const InverseFrequencySampling& s) const {
      return draw_inverse_frequency(labels, inverse_frequency_epoch_size(counts, s.cap_multiplier),
                                    seed);
    }

    std::vector<std::size_t> operator()(const PairBalancedSampling& s) const {
      auto groups = group_by_class(labels);
      auto& lo = groups[static_cast<std::size_t>(s.key.lo)];
      auto& hi = groups[static_cast<std::size_t>(s.key.hi)];
      if (lo.empty() || hi.empty()) {
        throw DataError("pair " + s.key.name() + " has an empty class");
      }
      const std::size_t per_class = std::min(lo.size(), hi.size());
      Rng rng(seed);
      std::vector<std::size_t> out;
      out.reserve(2 * per_class);
      // Partial Fisher-Yates: the first per_class entries are a uniform
      // sample without replacement.
      for (auto* members : {&lo, &hi}) {
        for (std::size_t k = 0; k < per_class; ++k) {
          std::uniform_int_distribution<std::size_t> pick(k, members->size() - 1);
          std::swap((*members)[k], (*members)[pick(rng)]);
          out.push_back((*members)[k]);
        }
      }
      std::shuffle(out.begin(), out.end(), rng);
      return out;
    }
  };
  return std::visit(Visitor{labels, counts, spec.seed}, spec.variant);
}

std::vector<std::size_t> draw_epoch(const Dataset& dataset, const SamplerSpec& spec) {
  const auto labels = dataset.labels();
  return draw_epoch(std::span<const int>(labels), spec);
}

}  // namespace ferpair
