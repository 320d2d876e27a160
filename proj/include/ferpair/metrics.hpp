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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ferpair/datamodel.hpp"

namespace ferpair {

/// counts(true, predicted).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumClasses)
      : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  std::size_t operator()(std::size_t truth, std::size_t pred) const {
    return counts_[truth * classes_ + pred];
  }
  void add(std::size_t truth, std::size_t pred, std::size_t n = 1) {
    counts_[truth * classes_ + pred] += n;
  }

  std::size_t total() const noexcept;
  std::size_t trace() const noexcept;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t pred) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels,
                          std::size_t classes = kNumClasses);

/// 2PR/(P+R), or 0 when P + R == 0.
double f1_score(double precision, double recall);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  AveragedMetrics weighted;  // support-weighted; weighted recall == accuracy
  AveragedMetrics macro;
  std::size_t total = 0;
};

/// Zero denominators yield 0 rather than NaN.
ClassificationReport class_metrics(const ConfusionMatrix& cm);

struct PairClassStats {
  int cls = 0;
  double accuracy_percent = 0.0;  // per-class accuracy == recall * 100
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct PairStats {
  PairKey key;
  double overall_percent = 0.0;
  PairClassStats lo;
  PairClassStats hi;
  std::size_t total = 0;
};

/// 2x2 confusion with index 0 = key.lo, 1 = key.hi. Labels and predictions
/// must lie in the pair.
ConfusionMatrix pair_confusion(std::span<const int> preds, std::span<const int> labels, PairKey key);

PairStats pair_stats(const ConfusionMatrix& pair_cm, PairKey key);

/// Metrics on the 2x2 restriction.
PairStats pair_accuracy(std::span<const int> preds, std::span<const int> labels, PairKey key);

struct PairReportRow {
  PairKey key;
  double one_fc_accuracy = 0.0;  // percent
  double dict_accuracy = 0.0;    // percent
  double difference = 0.0;       // dict - one_fc
};

/// Rows sorted by one_fc_accuracy descending, ties in key order. Both maps
/// must hold the same keys.
std::vector<PairReportRow> pair_report(const std::map<PairKey, double>& one_fc,
                                       const std::map<PairKey, double>& dict);

// ---------------------------------------------------------------------------
// Text rendering. Percentages use one decimal, P/R/F1 three.

enum class ReportFormat { Tsv, Markdown };
ReportFormat parse_report_format(std::string_view text);
std::string extension(ReportFormat format);

/// Overall block plus one row per class, in class order.
std::string render_classification(const ClassificationReport& report, ReportFormat format);
/// Class, Accuracy, Precision, Recall, F1 with one two-row block per pair.
std::string render_pair_stats(std::span<const PairStats> stats, ReportFormat format);
/// Pair, One FC, Dict, Difference.
std::string render_pair_report(std::span<const PairReportRow> rows, ReportFormat format);

/// Fixed-point text with `decimals` places; negative zero prints as zero.
std::string format_fixed(double value, int decimals, bool explicit_sign = false);

}  // namespace ferpair
