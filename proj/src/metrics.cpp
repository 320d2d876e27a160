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

#include "ferpair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ferpair {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

class Table {
 public:
  Table(ReportFormat format, std::vector<std::string> header) : format_(format) {
    cols_ = header.size();
    add_line(header);
    if (format_ == ReportFormat::Markdown) {
      std::string sep = "|";
      for (std::size_t i = 0; i < cols_; ++i) sep += i == 0 ? "---|" : "---:|";
      out_ += sep + "\n";
    }
  }

  void row(const std::vector<std::string>& cells) { add_line(cells); }
  std::string str() const { return out_; }

 private:
  void add_line(const std::vector<std::string>& cells) {
    if (format_ == ReportFormat::Tsv) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ += '\t';
        out_ += cells[i];
      }
    } else {
      out_ += '|';
      for (const auto& c : cells) out_ += ' ' + c + " |";
    }
    out_ += '\n';
  }

  ReportFormat format_;
  std::size_t cols_ = 0;
  std::string out_;
};

std::string pct(double fraction_or_percent) { return format_fixed(fraction_or_percent, 1); }
std::string prf(double v) { return format_fixed(v, 3); }

}  // namespace

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t t = 0;
  for (std::size_t c = 0; c < classes_; ++c) t += counts_[c * classes_ + c];
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t t = 0;
  for (std::size_t p = 0; p < classes_; ++p) t += (*this)(truth, p);
  return t;
}

std::size_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::size_t t = 0;
  for (std::size_t r = 0; r < classes_; ++r) t += (*this)(r, pred);
  return t;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels,
                          std::size_t classes) {
  if (preds.size() != labels.size()) throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || labels[i] < 0 || static_cast<std::size_t>(preds[i]) >= classes ||
        static_cast<std::size_t>(labels[i]) >= classes) {
      throw std::invalid_argument("confusion: class index out of range at position " +
                                  std::to_string(i));
    }
    cm.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(preds[i]));
  }
  return cm;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  // Written as P * (2R / (P + R)) so that P == R returns P exactly.
  return s > 0.0 ? precision * (2.0 * recall / s) : 0.0;
}

ClassificationReport class_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw std::invalid_argument("class_metrics: empty confusion matrix");
  ClassificationReport r;
  r.total = total;
  r.accuracy = ratio(cm.trace(), total);
  const std::size_t c = cm.classes();
  r.per_class.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    auto& m = r.per_class[k];
    m.support = cm.row_sum(k);
    m.precision = ratio(cm(k, k), cm.col_sum(k));
    m.recall = ratio(cm(k, k), m.support);
    m.f1 = f1_score(m.precision, m.recall);
    const double w = static_cast<double>(m.support) / static_cast<double>(total);
    r.weighted.precision += w * m.precision;
    r.weighted.f1 += w * m.f1;
    r.macro.precision += m.precision / static_cast<double>(c);
    r.macro.recall += m.recall / static_cast<double>(c);
    r.macro.f1 += m.f1 / static_cast<double>(c);
  }
  // support * recall is the class's true-positive count, so the weighted
  // recall is summed in counts and matches accuracy bit for bit.
  r.weighted.recall = r.accuracy;
  return r;
}

ConfusionMatrix pair_confusion(std::span<const int> preds, std::span<const int> labels, PairKey key) {
  if (preds.size() != labels.size()) throw std::invalid_argument("pair_accuracy: length mismatch");
  ConfusionMatrix cm(2);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!key.contains(labels[i]) || !key.contains(preds[i])) {
      throw std::invalid_argument("pair_accuracy: class outside " + key.name() + " at position " +
                                  std::to_string(i));
    }
    cm.add(labels[i] == key.hi ? 1 : 0, preds[i] == key.hi ? 1 : 0);
  }
  return cm;
}

PairStats pair_stats(const ConfusionMatrix& pair_cm, PairKey key) {
  if (pair_cm.classes() != 2) throw std::invalid_argument("pair_stats needs a 2x2 matrix");
  if (pair_cm.total() == 0) throw std::invalid_argument("pair_accuracy: empty input");
  const auto report = class_metrics(pair_cm);
  PairStats s;
  s.key = key;
  s.total = pair_cm.total();
  s.overall_percent = 100.0 * report.accuracy;
  const auto fill = [&](PairClassStats& out, int cls, std::size_t k) {
    out.cls = cls;
    out.precision = report.per_class[k].precision;
    out.recall = report.per_class[k].recall;
    out.f1 = report.per_class[k].f1;
    out.support = report.per_class[k].support;
    out.accuracy_percent = 100.0 * out.recall;
  };
  fill(s.lo, key.lo, 0);
  fill(s.hi, key.hi, 1);
  return s;
}

PairStats pair_accuracy(std::span<const int> preds, std::span<const int> labels, PairKey key) {
  return pair_stats(pair_confusion(preds, labels, key), key);
}

std::vector<PairReportRow> pair_report(const std::map<PairKey, double>& one_fc,
                                       const std::map<PairKey, double>& dict) {
  if (one_fc.size() != dict.size()) throw std::invalid_argument("pair_report: key sets differ");
  std::vector<PairReportRow> rows;
  rows.reserve(one_fc.size());
  for (const auto& [key, acc] : one_fc) {
    const auto it = dict.find(key);
    if (it == dict.end()) throw std::invalid_argument("pair_report: " + key.name() + " missing from dictionary results");
    rows.push_back({key, acc, it->second, it->second - acc});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const PairReportRow& a, const PairReportRow& b) {
    return a.one_fc_accuracy > b.one_fc_accuracy;
  });
  return rows;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "tsv") return ReportFormat::Tsv;
  if (text == "markdown" || text == "md") return ReportFormat::Markdown;
  throw std::invalid_argument("format must be 'tsv' or 'markdown'");
}

std::string extension(ReportFormat format) { return format == ReportFormat::Tsv ? "tsv" : "md"; }

std::string format_fixed(double value, int decimals, bool explicit_sign) {
  const double scale = std::pow(10.0, decimals);
  double rounded = std::round(value * scale) / scale;
  if (rounded == 0.0) rounded = 0.0;  // drop the sign of -0.0
  char buf[64];
  const bool sign = explicit_sign && rounded != 0.0;
  std::snprintf(buf, sizeof(buf), sign ? "%+.*f" : "%.*f", decimals, rounded);
  return buf;
}

std::string render_classification(const ClassificationReport& report, ReportFormat format) {
  Table overall(format, {"metric", "accuracy", "precision", "recall", "f1"});
  Table classes(format, {"class", "precision", "recall", "f1", "support"});
  if (!report.per_class.empty()) {
    const std::string acc = pct(100.0 * report.accuracy);
    overall.row({"weighted", acc, prf(report.weighted.precision), prf(report.weighted.recall),
                 prf(report.weighted.f1)});
    overall.row({"macro", acc, prf(report.macro.precision), prf(report.macro.recall),
                 prf(report.macro.f1)});
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
      const auto& m = report.per_class[c];
      const std::string name = report.per_class.size() == kNumClasses
                                   ? std::string(class_name(static_cast<int>(c)))
                                   : std::to_string(c);
      classes.row({name, prf(m.precision), prf(m.recall), prf(m.f1), std::to_string(m.support)});
    }
  }
  return overall.str() + "\n" + classes.str();
}

std::string render_pair_stats(std::span<const PairStats> stats, ReportFormat format) {
  Table t(format, {"pair", "class", "accuracy", "precision", "recall", "f1", "support"});
  for (const auto& s : stats) {
    for (const auto* c : {&s.lo, &s.hi}) {
      t.row({s.key.name(), std::string(class_name(c->cls)), pct(c->accuracy_percent),
             prf(c->precision), prf(c->recall), prf(c->f1), std::to_string(c->support)});
    }
  }
  return t.str();
}

std::string render_pair_report(std::span<const PairReportRow> rows, ReportFormat format) {
  Table t(format, {"pair", "one_fc_accuracy", "dict_accuracy", "difference"});
  for (const auto& r : rows) {
    // Difference of the printed values, so the three columns agree exactly.
    const double one_fc = std::round(r.one_fc_accuracy * 10.0) / 10.0;
    const double dict = std::round(r.dict_accuracy * 10.0) / 10.0;
    t.row({r.key.name(), pct(one_fc), pct(dict), format_fixed(dict - one_fc, 1, true)});
  }
  return t.str();
}

}  // namespace ferpair
