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
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ferpair {

inline constexpr std::size_t kNumClasses = 8;

// Canonical class order. Every table, confusion matrix and file label uses it.
enum class Expression : int {
  Neutral = 0,
  Happy = 1,
  Sad = 2,
  Surprise = 3,
  Fear = 4,
  Disgust = 5,
  Anger = 6,
  Contempt = 7,
};

using ClassCounts = std::array<std::size_t, kNumClasses>;
using ClassProportions = std::array<double, kNumClasses>;

/// Display name ("Fear").
std::string_view class_name(int cls);
/// Lower-case name used on the command line ("fear").
std::string class_slug(int cls);
/// Accepts either the display name or the slug, case-insensitive.
std::optional<int> parse_class(std::string_view name);

/// Raised for malformed or out-of-contract data. `row()` is the 1-based
/// line number in the source when the error came from a file, else 0.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t row = 0);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

struct FeatureRecord {
  std::string id;
  std::vector<double> features;
  int expression = 0;
  double valence = 0.0;
  double arousal = 0.0;
  std::vector<double> landmarks;  // flattened (x, y) pairs; empty when absent

  bool has_landmarks() const noexcept { return !landmarks.empty(); }
  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

/// Throws DataError if the record violates the label, range or finiteness
/// contract.
void validate_record(const FeatureRecord& record);

/// Ordered, immutable collection of records sharing one feature dimension
/// and one landmark length.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<FeatureRecord> records,
                   std::optional<std::size_t> feature_dim = std::nullopt);

  const std::vector<FeatureRecord>& records() const noexcept { return records_; }
  const FeatureRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  /// Landmark vector length (2L); 0 when records carry no landmarks.
  std::size_t landmark_dim() const noexcept { return landmark_dim_; }
  const ClassCounts& class_counts() const noexcept { return class_counts_; }
  std::vector<int> labels() const;

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<FeatureRecord> records_;
  std::size_t feature_dim_ = 0;
  std::size_t landmark_dim_ = 0;
  ClassCounts class_counts_{};
};

/// Unordered class pair stored canonically with lo < hi.
struct PairKey {
  int lo = 0;
  int hi = 1;

  /// Orders the two classes; throws DataError when equal or out of range.
  static PairKey of(int a, int b);
  /// Parses "fear-contempt" or "Fear+Contempt".
  static PairKey parse(std::string_view text);

  std::string name() const;  // "Fear+Contempt"
  std::string slug() const;  // "fear-contempt"
  bool contains(int cls) const noexcept { return cls == lo || cls == hi; }

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

/// All 28 pairs in lexicographic (lo, hi) order.
std::vector<PairKey> all_pairs();

struct ClassSpec {
  int expression = 0;
  std::size_t count = 0;
  std::vector<double> mean;
  double stddev = 1.0;
};

struct VaAnchor {
  double valence = 0.0;
  double arousal = 0.0;
};

/// Fixed per-class (valence, arousal) anchors used by the generator.
const std::array<VaAnchor, kNumClasses>& default_va_anchors();

struct SynthesisConfig {
  std::vector<ClassSpec> classes;
  std::size_t feature_dim = 0;
  std::uint64_t seed = 0;
  /// Landmark vector length (2L). Zero disables landmarks.
  std::size_t landmark_dim = 0;
  std::array<VaAnchor, kNumClasses> va_anchors = default_va_anchors();
  double va_noise = 0.15;
  double landmark_noise = 0.05;
  std::string id_prefix = "s";

  /// Throws DataError on non-positive counts/stddevs, duplicate classes or
  /// mean vectors of the wrong length.
  void validate() const;
};

/// Class means on mutually orthogonal directions so every pair sits exactly
/// `separation` apart. Falls back to random unit directions when
/// dim < number of classes.
std::vector<std::vector<double>> orthogonal_class_means(std::size_t num_classes,
                                                        std::size_t dim,
                                                        double separation,
                                                        std::uint64_t seed);

Dataset synthesize_dataset(const SynthesisConfig& config);

Dataset load_feature_file(std::istream& source,
                          std::optional<std::size_t> dim_hint = std::nullopt);
Dataset load_feature_file(const std::string& path,
                          std::optional<std::size_t> dim_hint = std::nullopt);

/// Writes the tab-separated feature format at full double precision, so a
/// reload reproduces every value bit for bit.
void write_feature_file(std::ostream& out, const Dataset& dataset);
void write_feature_file(const std::string& path, const Dataset& dataset);

ClassProportions class_distribution(const Dataset& dataset);
ClassProportions class_distribution(const ClassCounts& counts);

Dataset pair_view(const Dataset& dataset, PairKey key);

/// Stratified split: each class contributes floor(fraction * count) records to
/// train, the remainder to validation. Selection within a class is a seeded
/// shuffle; both halves keep the original relative order.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed);

/// Order-sensitive FNV-1a digest over every field. Used to assert that
/// training leaves its inputs untouched.
std::uint64_t checksum(const Dataset& dataset);

}  // namespace ferpair
