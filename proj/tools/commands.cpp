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


#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "ferpair/checkpoint.hpp"
#include "ferpair/heads.hpp"
#include "ferpair/losses.hpp"
#include "ferpair/metrics.hpp"
#include "ferpair/random.hpp"
#include "ferpair/sampling.hpp"
#include "ferpair/training.hpp"

namespace ferpair::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

constexpr ClassCounts kAffectNetTrain = {74874, 134415, 25459, 14090, 6378, 3803, 24882, 3750};
constexpr ClassCounts kBalancedTest = {500, 500, 500, 500, 500, 500, 500, 499};
constexpr ClassCounts kSkewedTest = {278, 500, 94, 52, 23, 14, 92, 13};

constexpr std::uint64_t kSplitTag = 0x53504c54;  // "SPLT"

// ---------------------------------------------------------------------------
// Small I/O helpers.

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'" +
                  (ec ? ": " + ec.message() : std::string{}));
  }
  return fs::path(dir);
}

void prepare_parent(const fs::path& file) {
  if (file.has_parent_path()) prepare_dir(file.parent_path().string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

json environment() {
  json env;
  env["tool"] = "ferpair";
  env["manifest_version"] = 1;
#if defined(__clang__)
  env["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = "gcc " __VERSION__;
#endif
  env["cplusplus"] = static_cast<long>(__cplusplus);
  return env;
}

// Every option of a command after merging flags, config file and defaults.
json echo_options(const CLI::App& app, const CLI::App& sub) {
  json j = json::object();
  if (const auto* cfg = app.get_config_ptr(); cfg != nullptr && cfg->count() > 0) {
    j["config"] = cfg->as<std::string>();
  }
  for (const CLI::Option* opt : sub.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    const std::string& key = names.front();
    if (opt->get_type_size() == 0) {
      j[key] = opt->count() > 0;
    } else if (opt->count() > 0) {
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      j[key] = joined;
    } else if (!opt->get_default_str().empty()) {
      j[key] = opt->get_default_str();
    } else {
      j[key] = nullptr;
    }
  }
  return j;
}

json counts_json(const ClassCounts& counts) {
  json j = json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) j[class_slug(c)] = counts[c];
  return j;
}

json dataset_json(const std::string& source, const Dataset& d) {
  json j;
  j["source"] = source;
  j["records"] = d.size();
  j["feature_dim"] = d.feature_dim();
  j["checksum"] = hex64(checksum(d));
  j["counts"] = counts_json(d.class_counts());
  return j;
}

json history_json(const std::vector<EpochRecord>& history) {
  json arr = json::array();
  for (const auto& r : history) {
    json e;
    e["epoch"] = r.epoch;
    e["train_loss"] = r.train_loss;
    e["train_accuracy"] = r.train_accuracy;
    e["val_loss"] = std::isfinite(r.val_loss) ? json(r.val_loss) : json(nullptr);
    e["val_accuracy"] = std::isfinite(r.val_accuracy) ? json(r.val_accuracy) : json(nullptr);
    e["lr"] = r.lr;
    arr.push_back(std::move(e));
  }
  return arr;
}

std::string history_tsv(const std::vector<EpochRecord>& history) {
  std::string s = "epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tlr\n";
  for (const auto& r : history) {
    s += std::to_string(r.epoch) + '\t' + shortest(r.train_loss) + '\t' +
         shortest(r.train_accuracy) + '\t' + shortest(r.val_loss) + '\t' +
         shortest(r.val_accuracy) + '\t' + shortest(r.lr) + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Training flags shared by train and pair-train.

struct TrainFlags {
  std::string train_path;
  std::string val_path;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t batch_size = 0;
  double weight_decay = 0.0;
  std::size_t patience = 0;
  double factor = 0.0;
  double threshold = 0.0;
  double min_lr = 0.0;
  std::string monitor = "train-loss";
  std::uint64_t seed = 1;
  std::string out;

  explicit TrainFlags(const TrainConfig& d)
      : epochs(d.epochs),
        lr(d.initial_lr),
        batch_size(d.batch_size),
        weight_decay(d.weight_decay),
        patience(d.rop.patience),
        factor(d.rop.factor),
        threshold(d.rop.threshold),
        min_lr(d.rop.min_lr) {}
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--train", f.train_path, "Training feature file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--val", f.val_path, "Validation feature file")->check(CLI::ExistingFile);
  sub->add_option("--epochs", f.epochs, "Training epochs");
  sub->add_option("--lr", f.lr, "Initial ADAM learning rate");
  sub->add_option("--batch-size", f.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--weight-decay", f.weight_decay, "L2 weight decay added to the gradient");
  sub->add_option("--patience", f.patience, "Reduce-on-plateau patience in epochs");
  sub->add_option("--factor", f.factor, "Reduce-on-plateau multiplier");
  sub->add_option("--rop-threshold", f.threshold, "Relative improvement threshold");
  sub->add_option("--min-lr", f.min_lr, "Learning-rate floor");
  sub->add_option("--monitor", f.monitor, "Plateau metric")
      ->check(CLI::IsMember({"train-loss", "val-loss"}));
  sub->add_option("--seed", f.seed, "Base seed");
  sub->add_option("--out", f.out, "Output directory")->required();
}

TrainConfig apply(const TrainFlags& f, TrainConfig c) {
  c.epochs = f.epochs;
  c.initial_lr = f.lr;
  c.batch_size = f.batch_size;
  c.weight_decay = f.weight_decay;
  c.seed = f.seed;
  c.rop.patience = f.patience;
  c.rop.factor = f.factor;
  c.rop.threshold = f.threshold;
  c.rop.min_lr = f.min_lr;
  c.rop.monitor = f.monitor == "val-loss" ? RopMonitor::ValLoss : RopMonitor::TrainLoss;
  return c;
}

json train_config_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["initial_lr"] = c.initial_lr;
  j["batch_size"] = c.batch_size;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["optimizer"] = {{"name", "adam"}, {"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}};
  j["rop"] = {{"patience", c.rop.patience},
              {"factor", c.rop.factor},
              {"threshold", c.rop.threshold},
              {"min_lr", c.rop.min_lr},
              {"monitor", c.rop.monitor == RopMonitor::ValLoss ? "val-loss" : "train-loss"}};
  json sampler;
  sampler["name"] = sampler_name(c.sampler);
  if (const auto* inv = std::get_if<InverseFrequencySampling>(&c.sampler)) {
    sampler["cap_multiplier"] = inv->cap_multiplier;
  }
  j["sampler"] = sampler;
  j["loss"] = {{"expression", to_string(c.loss.expression)},
               {"aam_scale", c.loss.aam.scale},
               {"aam_margin", c.loss.aam.margin},
               {"regression", to_string(c.loss.regression)},
               {"kappa", c.loss.signed_mse.kappa},
               {"weights", c.loss.weights}};
  return j;
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
  std::string profile = "affectnet-skew";
  double scale = 1.0;
  std::vector<std::size_t> counts;
  std::size_t dim = 32;
  double separation = 3.0;
  double stddev = 1.0;
  std::size_t landmarks = 0;
  double va_noise = 0.15;
  double landmark_noise = 0.05;
  std::uint64_t seed = 1;
  std::uint64_t geometry_seed = 7;
  std::string id_prefix = "s";
  std::string out;
};

void add_synth(CLI::App& app, SynthFlags& f) {
  auto* sub = app.add_subcommand("synth", "Generate a synthetic feature file");
  sub->add_option("--profile", f.profile, "Class-count preset")
      ->check(CLI::IsMember({"affectnet-skew", "balanced-test", "skewed-test", "custom"}));
  sub->add_option("--scale", f.scale, "Count multiplier for affectnet-skew (rounded half up)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--counts", f.counts, "Eight per-class counts for --profile custom")
      ->expected(kNumClasses)
      ->delimiter(',');
  sub->add_option("--dim", f.dim, "Feature dimension")->check(CLI::PositiveNumber);
  sub->add_option("--separation", f.separation, "Distance between any two class means");
  sub->add_option("--stddev", f.stddev, "Per-coordinate cluster standard deviation");
  sub->add_option("--landmarks", f.landmarks, "Landmark points per record (0 disables)");
  sub->add_option("--va-noise", f.va_noise, "Valence/arousal noise standard deviation");
  sub->add_option("--landmark-noise", f.landmark_noise, "Landmark noise standard deviation");
  sub->add_option("--seed", f.seed, "Sample seed");
  sub->add_option("--geometry-seed", f.geometry_seed, "Seed for the class-mean directions");
  sub->add_option("--id-prefix", f.id_prefix, "Record id prefix");
  sub->add_option("--out", f.out, "Output feature file; the manifest goes to <out>.manifest.json")
      ->required();
}

int cmd_synth(const CLI::App& app, const CLI::App& sub, const SynthFlags& f, std::ostream& out) {
  ClassCounts counts{};
  if (f.profile == "custom") {
    if (f.counts.size() != kNumClasses) throw ConfigError("--profile custom needs --counts with 8 values");
    std::copy(f.counts.begin(), f.counts.end(), counts.begin());
  } else {
    if (!f.counts.empty()) throw ConfigError("--counts is only valid with --profile custom");
    counts = profile_counts(f.profile, f.scale);
  }

  const auto means = orthogonal_class_means(kNumClasses, f.dim, f.separation, f.geometry_seed);
  SynthesisConfig cfg;
  cfg.feature_dim = f.dim;
  cfg.seed = f.seed;
  cfg.landmark_dim = 2 * f.landmarks;
  cfg.va_noise = f.va_noise;
  cfg.landmark_noise = f.landmark_noise;
  cfg.id_prefix = f.id_prefix;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) continue;
    cfg.classes.push_back({static_cast<int>(c), counts[c], means[c], f.stddev});
  }
  if (cfg.classes.empty()) throw ConfigError("synth: every class count is zero");
  try {
    cfg.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }

  const Dataset data = synthesize_dataset(cfg);
  const fs::path path(f.out);
  prepare_parent(path);
  write_feature_file(path.string(), data);

  json m;
  m["command"] = "synth";
  m["environment"] = environment();
  m["options"] = echo_options(app, sub);
  json resolved;
  resolved["profile"] = f.profile;
  resolved["scale"] = f.profile == "affectnet-skew" ? json(f.scale) : json(nullptr);
  resolved["counts"] = counts_json(counts);
  resolved["feature_dim"] = f.dim;
  resolved["separation"] = f.separation;
  resolved["stddev"] = f.stddev;
  resolved["landmark_points"] = f.landmarks;
  resolved["va_noise"] = f.va_noise;
  resolved["landmark_noise"] = f.landmark_noise;
  resolved["seed"] = f.seed;
  resolved["geometry_seed"] = f.geometry_seed;
  m["resolved"] = resolved;
  json anchors = json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    anchors[class_slug(c)] = {{"valence", cfg.va_anchors[c].valence},
                              {"arousal", cfg.va_anchors[c].arousal}};
  }
  m["va_anchors"] = anchors;
  m["output"] = dataset_json(path.string(), data);
  write_text(path.string() + ".manifest.json", dump(m));

  out << "wrote " << data.size() << " records to " << path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct GeneralFlags {
  TrainFlags common{general_train_defaults()};
  double val_fraction = 0.2;
  std::string sampler = "natural";
  double cap_multiplier = 2.0;
  std::string expression_loss = "softmax";
  double aam_scale = AamParams{}.scale;
  double aam_margin = AamParams{}.margin;
  std::string regression = "signed-mse";
  double kappa = SignedMseParams{}.kappa;
  std::vector<double> loss_weights{1.0, 1.0, 1.0, 1.0};
};

void add_train(CLI::App& app, GeneralFlags& f) {
  auto* sub = app.add_subcommand("train", "Train the general multi-output head");
  add_train_flags(sub, f.common);
  sub->add_option("--val-fraction", f.val_fraction,
                  "Held-out stratified fraction when --val is absent")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--sampler", f.sampler, "Epoch sampler")
      ->check(CLI::IsMember({"natural", "inverse-frequency"}));
  sub->add_option("--cap-multiplier", f.cap_multiplier, "Inverse-frequency epoch size multiplier");
  sub->add_option("--expression-loss", f.expression_loss, "Expression classification loss")
      ->check(CLI::IsMember({"softmax", "aam"}));
  sub->add_option("--aam-scale", f.aam_scale, "AAM hypersphere radius s");
  sub->add_option("--aam-margin", f.aam_margin, "AAM angular margin m (radians)");
  sub->add_option("--regression", f.regression, "Valence/arousal/landmark loss")
      ->check(CLI::IsMember({"signed-mse", "pearson"}));
  sub->add_option("--kappa", f.kappa, "Signed-MSE sign-mismatch penalty");
  sub->add_option("--loss-weights", f.loss_weights,
                  "Weights for expression,valence,arousal,landmarks")
      ->expected(4)
      ->delimiter(',');
}

int cmd_train(const CLI::App& app, const CLI::App& sub, const GeneralFlags& f, std::ostream& out) {
  TrainConfig cfg = apply(f.common, general_train_defaults());
  if (f.sampler == "inverse-frequency") {
    cfg.sampler = InverseFrequencySampling{f.cap_multiplier};
  } else {
    cfg.sampler = NaturalSampling{};
  }
  cfg.loss.expression =
      f.expression_loss == "aam" ? ExpressionLossKind::Aam : ExpressionLossKind::SoftmaxCe;
  cfg.loss.aam = AamParams{f.aam_scale, f.aam_margin};
  cfg.loss.regression =
      f.regression == "pearson" ? RegressionLossKind::Pearson : RegressionLossKind::SignedMse;
  cfg.loss.signed_mse.kappa = f.kappa;
  if (f.loss_weights.size() != 4) throw ConfigError("--loss-weights needs 4 values");
  std::copy(f.loss_weights.begin(), f.loss_weights.end(), cfg.loss.weights.begin());
  cfg.validate();

  const fs::path dir = prepare_dir(f.common.out);
  const Dataset full = load_feature_file(f.common.train_path);
  Dataset train;
  Dataset val;
  json split_info = nullptr;
  if (!f.common.val_path.empty()) {
    train = full;
    val = load_feature_file(f.common.val_path, full.feature_dim());
  } else {
    if (!(f.val_fraction > 0.0 && f.val_fraction < 1.0)) {
      throw ConfigError("--val-fraction must lie strictly between 0 and 1");
    }
    const auto split_seed = derive_seed(cfg.seed, {kSplitTag});
    std::tie(train, val) = split(full, 1.0 - f.val_fraction, split_seed);
    split_info = {{"val_fraction", f.val_fraction}, {"seed", split_seed}};
  }

  const auto result = train_general(train, val, cfg);
  save_checkpoint((dir / "general.ckpt").string(), result.head);
  write_text(dir / "history.tsv", history_tsv(result.history));

  json m;
  m["command"] = "train";
  m["environment"] = environment();
  m["options"] = echo_options(app, sub);
  m["resolved"] = train_config_json(cfg);
  m["data"] = {{"train", dataset_json(f.common.train_path, train)},
               {"val", dataset_json(f.common.val_path.empty() ? f.common.train_path
                                                               : f.common.val_path,
                                    val)},
               {"split", split_info}};
  m["history"] = history_json(result.history);
  json summary;
  summary["epochs_run"] = result.history.size();
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    summary["final_train_loss"] = last.train_loss;
    summary["final_train_accuracy"] = last.train_accuracy;
    summary["final_val_loss"] = last.val_loss;
    summary["final_val_accuracy"] = last.val_accuracy;
    summary["final_lr"] = last.lr;
  } else {
    const auto ev = evaluate_general(result.head, val, cfg.loss, cfg.batch_size);
    summary["final_val_loss"] = ev.loss;
    summary["final_val_accuracy"] = ev.accuracy;
  }
  m["summary"] = summary;
  m["outputs"] = {"general.ckpt", "history.tsv", "manifest.json"};
  write_text(dir / "manifest.json", dump(m));

  out << "trained general head: " << result.history.size() << " epochs, val accuracy "
      << format_fixed(100.0 * summary["final_val_accuracy"].get<double>(), 1) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// pair-train

struct PairFlags {
  TrainFlags common{pair_train_defaults()};
  std::string mode = "detached";
  std::string general;
  std::vector<std::string> pairs;
  std::size_t jobs = 1;
};

void add_pair_train(CLI::App& app, PairFlags& f) {
  auto* sub = app.add_subcommand("pair-train", "Train the dictionary of pairwise heads");
  add_train_flags(sub, f.common);
  sub->add_option("--mode", f.mode, "Pair head input: general logits or raw features")
      ->check(CLI::IsMember({"stacked", "detached"}));
  sub->add_option("--general", f.general, "General checkpoint (required for stacked)")
      ->check(CLI::ExistingFile);
  sub->add_option("--pairs", f.pairs, "Comma-separated pairs such as fear-contempt (default: all 28)")
      ->delimiter(',');
  sub->add_option("--jobs", f.jobs, "Pairs trained in parallel")->check(CLI::PositiveNumber);
}

std::vector<PairKey> parse_pairs(const std::vector<std::string>& names) {
  if (names.empty()) return all_pairs();
  std::vector<PairKey> keys;
  for (const auto& n : names) {
    PairKey key;
    try {
      key = PairKey::parse(n);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  return keys;
}

int cmd_pair_train(const CLI::App& app, const CLI::App& sub, const PairFlags& f,
                   std::ostream& out) {
  const PairMode mode = parse_pair_mode(f.mode);
  if (mode == PairMode::Stacked && f.general.empty()) {
    throw ConfigError("--mode stacked requires --general <checkpoint>");
  }
  const auto keys = parse_pairs(f.pairs);
  TrainConfig cfg = apply(f.common, pair_train_defaults());
  cfg.validate();

  const fs::path dir = prepare_dir(f.common.out);
  std::optional<MultiOutputHead> general;
  if (!f.general.empty()) general = load_general_checkpoint(f.general);
  const Dataset train = load_feature_file(
      f.common.train_path,
      general ? std::optional<std::size_t>(general->feature_dim()) : std::nullopt);
  std::optional<Dataset> val;
  if (!f.common.val_path.empty()) val = load_feature_file(f.common.val_path, train.feature_dim());

  const auto result = train_pairwise(train, keys, general ? &*general : nullptr, cfg, mode, f.jobs,
                                     val ? &*val : nullptr);
  save_checkpoint((dir / "pairs.ckpt").string(), result.dict);

  json m;
  m["command"] = "pair-train";
  m["environment"] = environment();
  m["options"] = echo_options(app, sub);
  json resolved = train_config_json(cfg);
  resolved["sampler"] = {{"name", "pair-balanced"}};
  resolved["loss"] = {{"expression", "softmax"}};
  resolved["mode"] = to_string(mode);
  resolved["jobs"] = f.jobs;
  json pair_seeds = json::object();
  for (const auto& k : keys) pair_seeds[k.slug()] = pair_seed(cfg.seed, k);
  resolved["pair_seeds"] = pair_seeds;
  m["resolved"] = resolved;
  m["data"] = {{"train", dataset_json(f.common.train_path, train)},
               {"val", val ? dataset_json(f.common.val_path, *val) : json(nullptr)},
               {"general", f.general.empty() ? json(nullptr) : json(f.general)}};
  json trained = json::array();
  for (const auto& [k, _] : result.dict.entries) trained.push_back(k.slug());
  json skipped = json::array();
  for (const auto& k : result.skipped) skipped.push_back(k.slug());
  m["trained"] = trained;
  m["skipped"] = skipped;
  json histories = json::object();
  for (const auto& [k, h] : result.history) histories[k.slug()] = history_json(h);
  m["history"] = histories;
  m["outputs"] = {"pairs.ckpt", "manifest.json"};
  write_text(dir / "manifest.json", dump(m));

  out << "trained " << result.dict.entries.size() << " pair heads";
  if (!result.skipped.empty()) {
    out << ", skipped";
    for (const auto& k : result.skipped) out << ' ' << k.slug();
  }
  out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval / report

json matrix_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm(t, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConfusionMatrix matrix_from_json(const json& j, std::size_t classes) {
  if (!j.is_array() || j.size() != classes) throw DataError("metrics: malformed confusion matrix");
  ConfusionMatrix cm(classes);
  for (std::size_t t = 0; t < classes; ++t) {
    if (!j[t].is_array() || j[t].size() != classes) {
      throw DataError("metrics: malformed confusion matrix");
    }
    for (std::size_t p = 0; p < classes; ++p) cm.add(t, p, j[t][p].get<std::size_t>());
  }
  return cm;
}

struct Rendered {
  std::string name;
  std::string text;
};

// Renders every report held in a metrics document. Shared by eval and
// report so both produce identical bytes.
std::vector<Rendered> render_metrics(const json& metrics, ReportFormat format) {
  std::vector<Rendered> files;
  const std::string ext = "." + extension(format);
  const auto general = matrix_from_json(metrics.at("general").at("confusion"), kNumClasses);
  files.push_back({"general_report" + ext, render_classification(class_metrics(general), format)});

  const auto& pairs = metrics.at("pairs");
  if (pairs.is_null()) return files;
  std::vector<PairStats> one_fc;
  std::vector<PairStats> dict;
  std::map<PairKey, double> one_fc_acc;
  std::map<PairKey, double> dict_acc;
  for (const auto& p : pairs) {
    const auto key = PairKey::parse(p.at("pair").get<std::string>());
    one_fc.push_back(pair_stats(matrix_from_json(p.at("one_fc"), 2), key));
    if (p.contains("dict")) {
      dict.push_back(pair_stats(matrix_from_json(p.at("dict"), 2), key));
      one_fc_acc[key] = one_fc.back().overall_percent;
      dict_acc[key] = dict.back().overall_percent;
    }
  }
  files.push_back({"pair_stats" + ext, render_pair_stats(one_fc, format)});
  if (!dict.empty()) {
    files.push_back({"pair_stats_dict" + ext, render_pair_stats(dict, format)});
    const auto rows = pair_report(one_fc_acc, dict_acc);
    files.push_back({"pair_report" + ext, render_pair_report(rows, format)});
  }
  return files;
}

struct EvalFlags {
  std::string checkpoint;
  std::string test;
  bool pairwise = false;
  std::string dict;
  std::string format = "tsv";
  std::string out;
};

void add_eval(CLI::App& app, EvalFlags& f) {
  auto* sub = app.add_subcommand("eval", "Evaluate a general checkpoint, optionally per pair");
  sub->add_option("--checkpoint", f.checkpoint, "General checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--test", f.test, "Test feature file")->required()->check(CLI::ExistingFile);
  sub->add_flag("--pairwise", f.pairwise, "Also evaluate every pair by restricted argmax");
  sub->add_option("--dict", f.dict, "Pair dictionary checkpoint to compare (implies --pairwise)")
      ->check(CLI::ExistingFile);
  sub->add_option("--format", f.format, "Report format")->check(CLI::IsMember({"tsv", "markdown"}));
  sub->add_option("--out", f.out, "Output directory")->required();
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const ReportFormat format = parse_report_format(f.format);
  const fs::path dir = prepare_dir(f.out);
  const auto head = load_general_checkpoint(f.checkpoint);
  const Dataset test = load_feature_file(f.test);
  if (test.feature_dim() != head.feature_dim()) {
    throw DataError("test features have dimension " + std::to_string(test.feature_dim()) +
                    " but the checkpoint expects " + std::to_string(head.feature_dim()));
  }
  std::optional<PairwiseHeadDict> dict;
  if (!f.dict.empty()) {
    dict = load_pairwise_checkpoint(f.dict);
    if (dict->feature_dim != head.feature_dim()) {
      throw DataError("pair dictionary feature dimension " + std::to_string(dict->feature_dim) +
                      " does not match the checkpoint's " + std::to_string(head.feature_dim()));
    }
  }

  const auto labels = test.labels();
  const auto preds = predict_general(head, test);
  json metrics;
  metrics["test"] = dataset_json(f.test, test);
  metrics["general"] = {{"confusion", matrix_json(confusion(preds, labels))}};
  metrics["pairs"] = nullptr;

  if (f.pairwise || dict) {
    const auto counts = test.class_counts();
    json pairs = json::array();
    for (const auto& key : all_pairs()) {
      if (counts[key.lo] == 0 || counts[key.hi] == 0) continue;
      const Dataset view = pair_view(test, key);
      const auto pl = view.labels();
      std::vector<int> general_preds;
      std::vector<int> dict_preds;
      const bool use_dict = dict && dict->contains(key);
      for (const auto& r : view) {
        general_preds.push_back(pair_eval_general(head, r.features, key));
        if (use_dict) dict_preds.push_back(pair_eval_dict(*dict, &head, r.features, key));
      }
      json p;
      p["pair"] = key.slug();
      p["one_fc"] = matrix_json(pair_confusion(general_preds, pl, key));
      if (use_dict) p["dict"] = matrix_json(pair_confusion(dict_preds, pl, key));
      pairs.push_back(std::move(p));
    }
    metrics["pairs"] = pairs;
  }

  write_text(dir / "metrics.json", dump(metrics));
  for (const auto& r : render_metrics(metrics, format)) write_text(dir / r.name, r.text);

  const auto report = class_metrics(confusion(preds, labels));
  out << "accuracy " << format_fixed(100.0 * report.accuracy, 1) << " on " << test.size()
      << " records\n";
  return kOk;
}

struct ReportFlags {
  std::string input;
  std::string format = "tsv";
  std::string out;
};

void add_report(CLI::App& app, ReportFlags& f) {
  auto* sub = app.add_subcommand("report", "Re-render a metrics.json file");
  sub->add_option("--input", f.input, "metrics.json written by eval")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--format", f.format, "Report format")->check(CLI::IsMember({"tsv", "markdown"}));
  sub->add_option("--out", f.out, "Output directory (default: print to stdout)");
}

int cmd_report(const ReportFlags& f, std::ostream& out) {
  std::ifstream in(f.input, std::ios::binary);
  if (!in) throw IoError("cannot read '" + f.input + "'");
  json metrics;
  try {
    metrics = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("metrics: ") + e.what());
  }
  const auto files = render_metrics(metrics, parse_report_format(f.format));
  if (f.out.empty()) {
    for (std::size_t i = 0; i < files.size(); ++i) out << (i ? "\n" : "") << files[i].text;
    return kOk;
  }
  const fs::path dir = prepare_dir(f.out);
  for (const auto& r : files) write_text(dir / r.name, r.text);
  return kOk;
}

}  // namespace

ClassCounts profile_counts(std::string_view profile, double scale) {
  if (profile == "balanced-test") return kBalancedTest;
  if (profile == "skewed-test") return kSkewedTest;
  if (profile == "affectnet-skew") {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("scale must be positive");
    ClassCounts c{};
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      c[k] = static_cast<std::size_t>(std::lround(static_cast<double>(kAffectNetTrain[k]) * scale));
    }
    return c;
  }
  throw std::invalid_argument("unknown profile '" + std::string(profile) + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frozen-feature facial expression training toolkit", "ferpair"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "INI/TOML file with [command] sections; flags take precedence")
      ->check(CLI::ExistingFile);
  app.require_subcommand(1);

  SynthFlags synth;
  GeneralFlags train;
  PairFlags pair;
  EvalFlags eval;
  ReportFlags report;
  add_synth(app, synth);
  add_train(app, train);
  add_pair_train(app, pair);
  add_eval(app, eval);
  add_report(app, report);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kOk : kConfigError;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "synth") return cmd_synth(app, *sub, synth, out);
    if (name == "train") return cmd_train(app, *sub, train, out);
    if (name == "pair-train") return cmd_pair_train(app, *sub, pair, out);
    if (name == "eval") return cmd_eval(eval, out);
    if (name == "report") return cmd_report(report, out);
  } catch (const DataError& e) {
    err << "ferpair " << name << ": data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "ferpair " << name << ": numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const IoError& e) {
    err << "ferpair " << name << ": " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "ferpair " << name << ": config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::out_of_range& e) {
    err << "ferpair " << name << ": config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "ferpair " << name << ": data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "ferpair " << name << ": " << e.what() << "\n";
    return kIoError;
  }
  return kConfigError;
}

}  // namespace ferpair::cli
