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

#include "ferpair/datamodel.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ferpair/random.hpp"

namespace ferpair {
namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Neutral", "Happy", "Sad", "Surprise", "Fear", "Disgust", "Anger", "Contempt"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool valid_class(int cls) { return cls >= 0 && cls < static_cast<int>(kNumClasses); }

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

double parse_real(std::string_view field, std::size_t row, std::string_view what) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw DataError("row " + std::to_string(row) + ": " + std::string(what) +
                        " is not a number: '" + std::string(field) + "'",
                    row);
  }
  return value;
}

long long parse_integer(std::string_view field, std::size_t row, std::string_view what) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw DataError("row " + std::to_string(row) + ": " + std::string(what) +
                        " is not an integer: '" + std::string(field) + "'",
                    row);
  }
  return value;
}

void append_real(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

Dataset parse_lines(std::istream& source, std::optional<std::size_t> dim_hint) {
  std::vector<FeatureRecord> records;
  std::optional<std::size_t> dim = dim_hint;
  std::optional<std::size_t> lm_dim;
  std::string line;
  std::size_t row = 0;
  while (std::getline(source, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_tabs(line);
    const auto fail = [row](const std::string& msg) -> DataError {
      return DataError("row " + std::to_string(row) + ": " + msg, row);
    };
    if (fields.size() < 6) throw fail("expected at least 6 fields, got " + std::to_string(fields.size()));

    FeatureRecord rec;
    rec.id = std::string(fields[0]);
    const long long label = parse_integer(fields[1], row, "expression");
    if (label < 0 || label >= static_cast<long long>(kNumClasses)) {
      throw fail("expression label " + std::to_string(label) + " outside 0..7");
    }
    rec.expression = static_cast<int>(label);
    rec.valence = parse_real(fields[2], row, "valence");
    rec.arousal = parse_real(fields[3], row, "arousal");
    if (!(rec.valence >= -1.0 && rec.valence <= 1.0)) {
      throw fail("valence " + std::string(fields[2]) + " outside [-1, 1]");
    }
    if (!(rec.arousal >= -1.0 && rec.arousal <= 1.0)) {
      throw fail("arousal " + std::string(fields[3]) + " outside [-1, 1]");
    }

    const long long l = parse_integer(fields[4], row, "landmark count");
    if (l < 0) throw fail("negative landmark count");
    const std::size_t n_lm = 2 * static_cast<std::size_t>(l);
    const std::size_t d_at = 5 + n_lm;
    if (fields.size() <= d_at) throw fail("missing feature dimension field");
    const long long d = parse_integer(fields[d_at], row, "feature dimension");
    if (d <= 0) throw fail("feature dimension must be positive");
    const std::size_t expected = d_at + 1 + static_cast<std::size_t>(d);
    if (fields.size() != expected) {
      throw fail("expected " + std::to_string(expected) + " fields, got " +
                 std::to_string(fields.size()));
    }
    if (dim && *dim != static_cast<std::size_t>(d)) {
      throw fail("feature dimension " + std::to_string(d) + " differs from " +
                 std::to_string(*dim));
    }
    if (lm_dim && *lm_dim != n_lm) {
      throw fail("landmark length " + std::to_string(n_lm) + " differs from " +
                 std::to_string(*lm_dim));
    }
    dim = static_cast<std::size_t>(d);
    lm_dim = n_lm;

    rec.landmarks.reserve(n_lm);
    for (std::size_t i = 0; i < n_lm; ++i) {
      rec.landmarks.push_back(parse_real(fields[5 + i], row, "landmark"));
    }
    rec.features.reserve(static_cast<std::size_t>(d));
    for (std::size_t i = d_at + 1; i < fields.size(); ++i) {
      const double v = parse_real(fields[i], row, "feature");
      if (!std::isfinite(v)) throw fail("non-finite feature value");
      rec.features.push_back(v);
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw DataError("no records");
  return Dataset(std::move(records), dim);
}

}  // namespace

std::string_view class_name(int cls) {
  if (!valid_class(cls)) throw DataError("class index " + std::to_string(cls) + " outside 0..7");
  return kClassNames[static_cast<std::size_t>(cls)];
}

std::string class_slug(int cls) { return lower(class_name(cls)); }

std::optional<int> parse_class(std::string_view name) {
  const std::string want = lower(name);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (lower(kClassNames[c]) == want) return static_cast<int>(c);
  }
  return std::nullopt;
}

DataError::DataError(const std::string& what, std::size_t row)
    : std::runtime_error(what), row_(row) {}

void validate_record(const FeatureRecord& record) {
  if (!valid_class(record.expression)) {
    throw DataError("record '" + record.id + "': expression outside 0..7");
  }
  if (!(record.valence >= -1.0 && record.valence <= 1.0) ||
      !(record.arousal >= -1.0 && record.arousal <= 1.0)) {
    throw DataError("record '" + record.id + "': valence/arousal outside [-1, 1]");
  }
  if (record.features.empty()) throw DataError("record '" + record.id + "': no features");
  for (double f : record.features) {
    if (!std::isfinite(f)) throw DataError("record '" + record.id + "': non-finite feature");
  }
  if (record.landmarks.size() % 2 != 0) {
    throw DataError("record '" + record.id + "': odd landmark vector length");
  }
}

Dataset::Dataset(std::vector<FeatureRecord> records, std::optional<std::size_t> feature_dim)
    : records_(std::move(records)) {
  if (records_.empty()) {
    feature_dim_ = feature_dim.value_or(0);
    return;
  }
  feature_dim_ = feature_dim.value_or(records_.front().features.size());
  landmark_dim_ = records_.front().landmarks.size();
  for (const auto& r : records_) {
    validate_record(r);
    if (r.features.size() != feature_dim_) {
      throw DataError("record '" + r.id + "': feature dimension " +
                      std::to_string(r.features.size()) + " differs from " +
                      std::to_string(feature_dim_));
    }
    if (r.landmarks.size() != landmark_dim_) {
      throw DataError("record '" + r.id + "': inconsistent landmark length");
    }
    ++class_counts_[static_cast<std::size_t>(r.expression)];
  }
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.expression);
  return out;
}

PairKey PairKey::of(int a, int b) {
  if (!valid_class(a) || !valid_class(b)) throw DataError("pair class outside 0..7");
  if (a == b) throw DataError("pair needs two distinct classes");
  return a < b ? PairKey{a, b} : PairKey{b, a};
}

PairKey PairKey::parse(std::string_view text) {
  const std::size_t sep = text.find_first_of("-+");
  if (sep == std::string_view::npos) {
    throw DataError("pair '" + std::string(text) + "' must look like fear-contempt");
  }
  const auto a = parse_class(text.substr(0, sep));
  const auto b = parse_class(text.substr(sep + 1));
  if (!a || !b) throw DataError("unknown class in pair '" + std::string(text) + "'");
  return of(*a, *b);
}

std::string PairKey::name() const {
  return std::string(class_name(lo)) + "+" + std::string(class_name(hi));
}

std::string PairKey::slug() const { return class_slug(lo) + "-" + class_slug(hi); }

std::vector<PairKey> all_pairs() {
  std::vector<PairKey> keys;
  for (int lo = 0; lo < static_cast<int>(kNumClasses); ++lo) {
    for (int hi = lo + 1; hi < static_cast<int>(kNumClasses); ++hi) keys.push_back({lo, hi});
  }
  return keys;
}

const std::array<VaAnchor, kNumClasses>& default_va_anchors() {
  static const std::array<VaAnchor, kNumClasses> anchors = {{
      {0.0, 0.0},    // Neutral
      {0.8, 0.5},    // Happy
      {-0.6, -0.4},  // Sad
      {0.3, 0.8},    // Surprise
      {-0.6, 0.7},   // Fear
      {-0.7, 0.3},   // Disgust
      {-0.5, 0.8},   // Anger
      {-0.4, 0.2},   // Contempt
  }};
  return anchors;
}

void SynthesisConfig::validate() const {
  if (feature_dim == 0) throw DataError("synthesis: feature_dim must be positive");
  if (classes.empty()) throw DataError("synthesis: no classes configured");
  if (landmark_dim % 2 != 0) throw DataError("synthesis: landmark_dim must be even");
  if (!(va_noise >= 0.0) || !(landmark_noise >= 0.0)) {
    throw DataError("synthesis: noise levels must be non-negative");
  }
  std::array<bool, kNumClasses> seen{};
  for (const auto& c : classes) {
    if (!valid_class(c.expression)) throw DataError("synthesis: class outside 0..7");
    if (seen[static_cast<std::size_t>(c.expression)]) {
      throw DataError("synthesis: class " + std::string(class_name(c.expression)) +
                      " listed twice");
    }
    seen[static_cast<std::size_t>(c.expression)] = true;
    if (c.count == 0) throw DataError("synthesis: counts must be positive");
    if (!(c.stddev > 0.0) || !std::isfinite(c.stddev)) {
      throw DataError("synthesis: stddev must be positive");
    }
    if (c.mean.size() != feature_dim) {
      throw DataError("synthesis: mean of " + std::string(class_name(c.expression)) +
                      " has wrong dimension");
    }
  }
}

std::vector<std::vector<double>> orthogonal_class_means(std::size_t num_classes,
                                                        std::size_t dim,
                                                        double separation,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  const bool orthogonal = dim >= num_classes;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    if (orthogonal) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  // Orthonormal e_a, e_b are sqrt(2) apart.
  const double radius = separation / std::sqrt(2.0);
  for (auto& v : basis) {
    for (auto& x : v) x *= radius;
  }
  return basis;
}

Dataset synthesize_dataset(const SynthesisConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::size_t total = 0;
  for (const auto& c : config.classes) total += c.count;
  std::vector<FeatureRecord> records;
  records.reserve(total);

  std::size_t next_id = 0;
  for (const auto& spec : config.classes) {
    std::vector<double> lm_template(config.landmark_dim);
    if (config.landmark_dim > 0) {
      Rng lm_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(spec.expression), 0x4c4dULL}));
      std::uniform_real_distribution<double> unit(-0.5, 0.5);
      for (auto& v : lm_template) v = unit(lm_rng);
    }
    const VaAnchor anchor = config.va_anchors[static_cast<std::size_t>(spec.expression)];
    for (std::size_t n = 0; n < spec.count; ++n) {
      FeatureRecord rec;
      rec.id = config.id_prefix + std::to_string(next_id++);
      rec.expression = spec.expression;
      rec.features.resize(config.feature_dim);
      for (std::size_t i = 0; i < config.feature_dim; ++i) {
        rec.features[i] = spec.mean[i] + spec.stddev * normal(rng);
      }
      rec.valence = std::clamp(anchor.valence + config.va_noise * normal(rng), -1.0, 1.0);
      rec.arousal = std::clamp(anchor.arousal + config.va_noise * normal(rng), -1.0, 1.0);
      rec.landmarks.resize(config.landmark_dim);
      for (std::size_t i = 0; i < config.landmark_dim; ++i) {
        rec.landmarks[i] = lm_template[i] + config.landmark_noise * normal(rng);
      }
      records.push_back(std::move(rec));
    }
  }
  return Dataset(std::move(records), config.feature_dim);
}

Dataset load_feature_file(std::istream& source, std::optional<std::size_t> dim_hint) {
  return parse_lines(source, dim_hint);
}

Dataset load_feature_file(const std::string& path, std::optional<std::size_t> dim_hint) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file '" + path + "'");
  return parse_lines(in, dim_hint);
}

void write_feature_file(std::ostream& out, const Dataset& dataset) {
  out << "# id\texpression\tvalence\tarousal\tL\tlandmarks...\tD\tfeatures...\n";
  std::string line;
  for (const auto& r : dataset) {
    line.clear();
    line += r.id;
    line += '\t';
    line += std::to_string(r.expression);
    line += '\t';
    append_real(line, r.valence);
    line += '\t';
    append_real(line, r.arousal);
    line += '\t';
    line += std::to_string(r.landmarks.size() / 2);
    for (double v : r.landmarks) {
      line += '\t';
      append_real(line, v);
    }
    line += '\t';
    line += std::to_string(r.features.size());
    for (double v : r.features) {
      line += '\t';
      append_real(line, v);
    }
    line += '\n';
    out << line;
  }
}

void write_feature_file(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file '" + path + "'");
  write_feature_file(out, dataset);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

ClassProportions class_distribution(const ClassCounts& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw DataError("class distribution of an empty dataset");
  ClassProportions p{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  return p;
}

ClassProportions class_distribution(const Dataset& dataset) {
  return class_distribution(dataset.class_counts());
}

Dataset pair_view(const Dataset& dataset, PairKey key) {
  std::vector<FeatureRecord> kept;
  for (const auto& r : dataset) {
    if (key.contains(r.expression)) kept.push_back(r);
  }
  return Dataset(std::move(kept), dataset.feature_dim());
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DataError("train fraction must lie in (0, 1)");
  }
  if (dataset.empty()) throw DataError("cannot split an empty dataset");

  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset[i].expression)].push_back(i);
  }
  std::vector<bool> to_train(dataset.size(), false);
  Rng rng(seed);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = true;
  }
  std::vector<FeatureRecord> train, val;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (to_train[i] ? train : val).push_back(dataset[i]);
  }
  return {Dataset(std::move(train), dataset.feature_dim()),
          Dataset(std::move(val), dataset.feature_dim())};
}

std::uint64_t checksum(const Dataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& r : dataset) {
    feed(r.id.data(), r.id.size());
    feed(&r.expression, sizeof r.expression);
    feed(&r.valence, sizeof r.valence);
    feed(&r.arousal, sizeof r.arousal);
    feed(r.landmarks.data(), r.landmarks.size() * sizeof(double));
    feed(r.features.data(), r.features.size() * sizeof(double));
  }
  return h;
}

}  // namespace ferpair
