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


#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "ferpair/checkpoint.hpp"
#include "ferpair/datamodel.hpp"

using namespace ferpair;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "ferpair-cli-XXXXXX").string();
    REQUIRE(::mkdtemp(tmpl.data()) != nullptr);
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

// Small well-separated synthetic train/test pair with every class present.
void make_data(const TempDir& dir, const std::string& separation = "6") {
  REQUIRE(run({"synth", "--profile", "custom", "--counts", "40,40,40,40,40,40,40,40", "--dim", "12",
               "--separation", separation, "--seed", "1", "--out", dir / "train.tsv"})
              .code == 0);
  REQUIRE(run({"synth", "--profile", "balanced-test", "--dim", "12", "--separation", separation, "--seed", "2",
               "--out", dir / "test.tsv"})
              .code == 0);
}

}  // namespace

TEST_CASE("synth presets") {
  CHECK(cli::profile_counts("affectnet-skew", 0.1) ==
        ClassCounts{7487, 13442, 2546, 1409, 638, 380, 2488, 375});
  CHECK(cli::profile_counts("balanced-test") == ClassCounts{500, 500, 500, 500, 500, 500, 500, 499});
  CHECK(cli::profile_counts("skewed-test") == ClassCounts{278, 500, 94, 52, 23, 14, 92, 13});
  CHECK_THROWS(cli::profile_counts("nope"));
}

TEST_CASE("synth writes features and a manifest with seeds and anchors") {
  TempDir dir;
  const auto r = run({"synth", "--profile", "balanced-test", "--dim", "4", "--seed", "9", "--out",
                      dir / "sub/test.tsv"});
  REQUIRE(r.code == 0);
  const Dataset d = load_feature_file(dir / "sub/test.tsv");
  CHECK(d.size() == 3999);
  CHECK(d.class_counts()[7] == 499);
  const auto m = read_json(dir / "sub/test.tsv.manifest.json");
  CHECK(m["resolved"]["seed"] == 9);
  CHECK(m["va_anchors"]["happy"]["valence"] == 0.8);
  CHECK(m["va_anchors"]["happy"]["arousal"] == 0.5);
  CHECK(m["output"]["records"] == 3999);

  CHECK(run({"synth", "--profile", "custom", "--out", dir / "x.tsv"}).code == cli::kConfigError);
  CHECK(run({"synth", "--profile", "skewed-test", "--counts", "1,1,1,1,1,1,1,1", "--out", dir / "x.tsv"}).code ==
        cli::kConfigError);
  CHECK(run({"synth", "--profile", "bogus", "--out", dir / "x.tsv"}).code == cli::kConfigError);
}

TEST_CASE("train defaults, zero epochs and reproducible manifests") {
  TempDir dir;
  make_data(dir);
  REQUIRE(run({"train", "--train", dir / "train.tsv", "--epochs", "0", "--out", dir / "a"}).code == 0);
  const auto m = read_json(dir / "a/manifest.json");
  CHECK(m["resolved"]["initial_lr"] == 0.01);
  CHECK(m["resolved"]["batch_size"] == 256);
  CHECK(m["resolved"]["weight_decay"] == 5e-4);
  CHECK(m["resolved"]["rop"]["patience"] == 5);
  CHECK(m["resolved"]["rop"]["factor"] == 0.25);
  CHECK(m["resolved"]["loss"]["expression"] == "softmax");
  CHECK(m["history"].empty());
  CHECK(m["options"]["epochs"] == "0");
  CHECK(m["options"]["lr"] == "0.01");
  const auto head = load_general_checkpoint(dir / "a/general.ckpt");
  CHECK(head.feature_dim() == 12);

  REQUIRE(run({"train", "--train", dir / "train.tsv", "--epochs", "3", "--seed", "4", "--out", dir / "b"}).code == 0);
  const std::string first = slurp(dir / "b/manifest.json");
  const std::string ckpt = slurp(dir / "b/general.ckpt");
  REQUIRE(run({"train", "--train", dir / "train.tsv", "--epochs", "3", "--seed", "4", "--out", dir / "b"}).code == 0);
  CHECK(slurp(dir / "b/manifest.json") == first);
  CHECK(slurp(dir / "b/general.ckpt") == ckpt);
  CHECK(read_json(dir / "b/manifest.json")["history"].size() == 3);
}

TEST_CASE("help lists every flag with its default") {
  const auto train = run({"train", "--help"});
  CHECK(train.code == 0);
  for (const char* s : {"--epochs", "40", "--lr", "0.01", "--batch-size", "256", "--weight-decay", "0.0005",
                        "--patience", "--factor", "0.25", "--sampler", "natural", "--aam-scale", "64",
                        "--aam-margin", "0.5", "--val-fraction", "0.2"}) {
    CHECK_MESSAGE(train.out.find(s) != std::string::npos, s);
  }
  const auto pair = run({"pair-train", "--help"});
  for (const char* s : {"--epochs", "30", "--lr", "0.0001", "--jobs", "--mode", "detached"}) {
    CHECK_MESSAGE(pair.out.find(s) != std::string::npos, s);
  }
  const auto synth = run({"synth", "--help"});
  for (const char* s : {"--profile", "affectnet-skew", "--dim", "32", "--seed", "--out"}) {
    CHECK_MESSAGE(synth.out.find(s) != std::string::npos, s);
  }
  CHECK(run({"eval", "--help"}).out.find("--pairwise") != std::string::npos);
  CHECK(run({"report", "--help"}).out.find("--format") != std::string::npos);
  CHECK(run({}).code == cli::kConfigError);
}

TEST_CASE("config file sits between flags and defaults") {
  TempDir dir;
  make_data(dir);
  {
    std::ofstream cfg(dir / "run.ini");
    cfg << "[train]\nepochs=2\nlr=0.05\npatience=7\n";
  }
  REQUIRE(run({"--config", dir / "run.ini", "train", "--train", dir / "train.tsv", "--lr", "0.02", "--out",
               dir / "run"})
              .code == 0);
  const auto m = read_json(dir / "run/manifest.json");
  CHECK(m["resolved"]["epochs"] == 2);
  CHECK(m["resolved"]["initial_lr"] == 0.02);
  CHECK(m["resolved"]["rop"]["patience"] == 7);
  CHECK(m["resolved"]["rop"]["factor"] == 0.25);
  CHECK(m["options"]["config"] == dir / "run.ini");
}

TEST_CASE("pair-train subsets, full dictionary and stacked requirements") {
  TempDir dir;
  make_data(dir);
  REQUIRE(run({"train", "--train", dir / "train.tsv", "--epochs", "3", "--out", dir / "run"}).code == 0);

  CHECK(run({"pair-train", "--train", dir / "train.tsv", "--mode", "stacked", "--out", dir / "p"}).code ==
        cli::kConfigError);

  REQUIRE(run({"pair-train", "--train", dir / "train.tsv", "--pairs", "fear-contempt", "--epochs", "2", "--out",
               dir / "one"})
              .code == 0);
  CHECK(load_pairwise_checkpoint(dir / "one/pairs.ckpt").entries.size() == 1);

  REQUIRE(run({"pair-train", "--train", dir / "train.tsv", "--mode", "detached", "--epochs", "2", "--jobs", "3",
               "--out", dir / "all"})
              .code == 0);
  const auto dict = load_pairwise_checkpoint(dir / "all/pairs.ckpt");
  CHECK(dict.entries.size() == 28);
  const auto m = read_json(dir / "all/manifest.json");
  CHECK(m["trained"].size() == 28);
  CHECK(m["history"]["fear-contempt"].size() == 2);
  CHECK(m["resolved"]["initial_lr"] == 1e-4);

  REQUIRE(run({"pair-train", "--train", dir / "train.tsv", "--mode", "stacked", "--general",
               dir / "run/general.ckpt", "--pairs", "happy-sad,fear-contempt", "--epochs", "1", "--out",
               dir / "st"})
              .code == 0);
  CHECK(load_pairwise_checkpoint(dir / "st/pairs.ckpt").mode == PairMode::Stacked);

  CHECK(run({"pair-train", "--train", dir / "train.tsv", "--pairs", "fear-fear", "--out", dir / "bad"}).code ==
        cli::kConfigError);
}

TEST_CASE("pair-train lists pairs with an empty class as skipped") {
  TempDir dir;
  REQUIRE(run({"synth", "--profile", "custom", "--counts", "20,20,20,20,20,20,20,0", "--dim", "6", "--out",
               dir / "train.tsv"})
              .code == 0);
  const auto r = run({"pair-train", "--train", dir / "train.tsv", "--epochs", "1", "--out", dir / "p"});
  REQUIRE(r.code == 0);
  const auto m = read_json(dir / "p/manifest.json");
  CHECK(m["trained"].size() == 21);
  CHECK(m["skipped"].size() == 7);
  CHECK(r.out.find("skipped") != std::string::npos);
}

TEST_CASE("eval of a perfect predictor, pair reports and report re-rendering") {
  TempDir dir;
  make_data(dir, "40");
  REQUIRE(run({"train", "--train", dir / "train.tsv", "--epochs", "20", "--out", dir / "run"}).code == 0);
  REQUIRE(run({"pair-train", "--train", dir / "train.tsv", "--epochs", "5", "--lr", "0.01", "--out",
               dir / "pairs"})
              .code == 0);
  const auto r = run({"eval", "--checkpoint", dir / "run/general.ckpt", "--test", dir / "test.tsv", "--dict",
                      dir / "pairs/pairs.ckpt", "--format", "markdown", "--out", dir / "ev"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("accuracy 100.0") != std::string::npos);
  const std::string general = slurp(dir / "ev/general_report.md");
  CHECK(general.find("| weighted | 100.0 | 1.000 | 1.000 | 1.000 |") != std::string::npos);

  const std::string table4 = slurp(dir / "ev/pair_report.md");
  CHECK(std::count(table4.begin(), table4.end(), '\n') == 30);
  CHECK(table4.find("| pair | one_fc_accuracy | dict_accuracy | difference |") == 0);
  const std::string table5 = slurp(dir / "ev/pair_stats.md");
  CHECK(std::count(table5.begin(), table5.end(), '\n') == 2 + 56);

  // Same inputs twice: byte-identical reports.
  REQUIRE(run({"eval", "--checkpoint", dir / "run/general.ckpt", "--test", dir / "test.tsv", "--dict",
               dir / "pairs/pairs.ckpt", "--format", "markdown", "--out", dir / "ev2"})
              .code == 0);
  for (const char* f : {"general_report.md", "pair_report.md", "pair_stats.md", "pair_stats_dict.md", "metrics.json"}) {
    CHECK_MESSAGE(slurp(dir / ("ev/" + std::string(f))) == slurp(dir / ("ev2/" + std::string(f))), f);
  }

  REQUIRE(run({"report", "--input", dir / "ev/metrics.json", "--format", "markdown", "--out", dir / "rep"}).code ==
          0);
  CHECK(slurp(dir / "rep/pair_report.md") == table4);
  CHECK(slurp(dir / "rep/general_report.md") == general);
  const auto printed = run({"report", "--input", dir / "ev/metrics.json"});
  CHECK(printed.code == 0);
  CHECK(printed.out.find("metric\taccuracy") == 0);
}

TEST_CASE("exit codes separate config, data, numeric and I/O failures") {
  TempDir dir;
  make_data(dir);
  CHECK(run({"train", "--train", dir / "missing.tsv", "--out", dir / "o"}).code == cli::kConfigError);
  CHECK(run({"train", "--train", dir / "train.tsv", "--sampler", "weird", "--out", dir / "o"}).code ==
        cli::kConfigError);
  CHECK(run({"train", "--train", dir / "train.tsv", "--lr", "-1", "--out", dir / "o"}).code == cli::kConfigError);

  {
    std::ofstream bad(dir / "bad.tsv");
    bad << "# hand-written\nx\t9\t0\t0\t0\t2\t1\t2\n";
  }
  const auto data = run({"train", "--train", dir / "bad.tsv", "--out", dir / "o"});
  CHECK(data.code == cli::kDataError);
  CHECK(data.err.find("row 2") != std::string::npos);

  REQUIRE(run({"synth", "--profile", "balanced-test", "--dim", "5", "--out", dir / "d5.tsv"}).code == 0);
  REQUIRE(run({"train", "--train", dir / "train.tsv", "--epochs", "0", "--out", dir / "run"}).code == 0);
  CHECK(run({"eval", "--checkpoint", dir / "run/general.ckpt", "--test", dir / "d5.tsv", "--out", dir / "ev"}).code ==
        cli::kDataError);

  {
    std::ofstream huge(dir / "huge.tsv");
    Dataset d = load_feature_file(dir / "train.tsv");
    std::vector<FeatureRecord> recs(d.begin(), d.end());
    for (auto& r : recs) {
      for (auto& v : r.features) v *= 1e307;
    }
    write_feature_file(huge, Dataset(recs));
  }
  CHECK(run({"train", "--train", dir / "huge.tsv", "--epochs", "2", "--out", dir / "o"}).code == cli::kNumericError);

  { std::ofstream blocker(dir / "blocker"); }
  CHECK(run({"train", "--train", dir / "train.tsv", "--epochs", "0", "--out", dir / "blocker/sub"}).code ==
        cli::kIoError);
}
