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

#include "ferpair/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ferpair {
namespace {

[[noreturn]] void bad(const std::string& what) { throw DataError("checkpoint: " + what); }

void write_values(std::ostream& out, char tag, std::span<const double> values) {
  std::string line(1, tag);
  char buf[32];
  for (double v : values) {
    line += ' ';
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, ptr);
  }
  line += '\n';
  out << line;
}

void write_head(std::ostream& out, const std::string& name, const LinearHead& head) {
  out << "head " << name << ' ' << head.out_dim() << ' ' << head.in_dim() << " bias "
      << (head.has_bias() ? 1 : 0) << " normalized " << (head.normalized ? 1 : 0) << " scale ";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), head.scale);
  out << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
  write_values(out, 'w', head.weights.flat());
  if (head.has_bias()) write_values(out, 'b', head.bias);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream line() {
    std::string text;
    while (std::getline(in_, text)) {
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (!text.empty()) return std::istringstream(text);
    }
    bad("unexpected end of file");
  }

  std::string expect_word(std::istringstream& ls, const std::string& want) {
    std::string word;
    ls >> word;
    if (word != want) bad("expected '" + want + "', found '" + word + "'");
    return word;
  }

  template <typename T>
  T value(std::istringstream& ls, const char* what) {
    T v{};
    if (!(ls >> v)) bad(std::string("missing ") + what);
    return v;
  }

  std::string keyed(const std::string& key) {
    auto ls = line();
    expect_word(ls, key);
    return value<std::string>(ls, key.c_str());
  }

  std::vector<double> values(char tag, std::size_t n) {
    auto ls = line();
    std::string t;
    ls >> t;
    if (t != std::string(1, tag)) bad(std::string("expected '") + tag + "' line");
    std::vector<double> out;
    out.reserve(n);
    std::string tok;
    while (ls >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) bad("bad number '" + tok + "'");
      out.push_back(v);
    }
    if (out.size() != n) {
      bad("expected " + std::to_string(n) + " values, found " + std::to_string(out.size()));
    }
    return out;
  }

  LinearHead head(const std::string& want_name) {
    auto ls = line();
    expect_word(ls, "head");
    const auto name = value<std::string>(ls, "head name");
    if (name != want_name) bad("expected head '" + want_name + "', found '" + name + "'");
    return head_body(ls, name);
  }

  // Parses the remainder of a head line after its name, then the value lines.
  LinearHead head_body(std::istringstream& ls, const std::string& name) {
    const auto out_dim = value<std::size_t>(ls, "output dimension");
    const auto in_dim = value<std::size_t>(ls, "input dimension");
    expect_word(ls, "bias");
    const int has_bias = value<int>(ls, "bias flag");
    expect_word(ls, "normalized");
    const int normalized = value<int>(ls, "normalized flag");
    expect_word(ls, "scale");
    const auto scale = value<double>(ls, "scale");

    LinearHead h;
    h.weights = Matrix(out_dim, in_dim);
    const auto w = values('w', out_dim * in_dim);
    std::copy(w.begin(), w.end(), h.weights.flat().begin());
    if (has_bias != 0) h.bias = values('b', out_dim);
    h.normalized = normalized != 0;
    h.scale = scale;
    try {
      h.validate();
    } catch (const std::invalid_argument& e) {
      bad("head '" + name + "': " + e.what());
    }
    return h;
  }

  void header(const std::string& kind) {
    auto ls = line();
    expect_word(ls, "ferpair-checkpoint");
    const auto version = value<std::string>(ls, "version");
    if (version != "v" + std::to_string(kCheckpointVersion)) {
      bad("unsupported format version '" + version + "'");
    }
    const auto found = keyed("kind");
    if (found != kind) bad("expected a " + kind + " checkpoint, found " + found);
  }

 private:
  std::istream& in_;
};

void write_header(std::ostream& out, const char* kind) {
  out << "ferpair-checkpoint v" << kCheckpointVersion << '\n' << "kind " << kind << '\n';
}

template <typename T>
T load_from_path(const std::string& path, T (*loader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return loader(in);
}

template <typename T>
void save_to_path(const std::string& path, const T& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, value);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

void save_checkpoint(std::ostream& out, const MultiOutputHead& head) {
  head.validate();
  write_header(out, "general");
  out << "feature_dim " << head.feature_dim() << '\n';
  out << "landmarks " << (head.landmarks ? 1 : 0) << '\n';
  write_head(out, "expression", head.expression);
  write_head(out, "valence", head.valence);
  write_head(out, "arousal", head.arousal);
  if (head.landmarks) write_head(out, "landmarks", *head.landmarks);
  out << "end\n";
}

void save_checkpoint(std::ostream& out, const PairwiseHeadDict& dict) {
  dict.validate();
  write_header(out, "pairwise");
  out << "mode " << to_string(dict.mode) << '\n';
  out << "feature_dim " << dict.feature_dim << '\n';
  out << "entries " << dict.entries.size() << '\n';
  for (const auto& [key, head] : dict.entries) write_head(out, key.slug(), head);
  out << "end\n";
}

MultiOutputHead load_general_checkpoint(std::istream& in) {
  Reader r(in);
  r.header("general");
  const auto dim = std::stoul(r.keyed("feature_dim"));
  const bool has_landmarks = r.keyed("landmarks") == "1";
  MultiOutputHead head;
  head.expression = r.head("expression");
  head.valence = r.head("valence");
  head.arousal = r.head("arousal");
  if (has_landmarks) head.landmarks = r.head("landmarks");
  auto tail = r.line();
  r.expect_word(tail, "end");
  try {
    head.validate();
  } catch (const std::invalid_argument& e) {
    bad(e.what());
  }
  if (head.feature_dim() != dim) bad("feature_dim disagrees with head shapes");
  return head;
}

PairwiseHeadDict load_pairwise_checkpoint(std::istream& in) {
  Reader r(in);
  r.header("pairwise");
  PairwiseHeadDict dict;
  try {
    dict.mode = parse_pair_mode(r.keyed("mode"));
  } catch (const std::invalid_argument& e) {
    bad(e.what());
  }
  dict.feature_dim = std::stoul(r.keyed("feature_dim"));
  const auto n = std::stoul(r.keyed("entries"));
  for (std::size_t i = 0; i < n; ++i) {
    auto ls = r.line();
    r.expect_word(ls, "head");
    const auto name = r.value<std::string>(ls, "pair name");
    const PairKey key = PairKey::parse(name);
    LinearHead h = r.head_body(ls, name);
    if (!dict.entries.emplace(key, std::move(h)).second) bad("duplicate pair " + name);
  }
  auto tail = r.line();
  r.expect_word(tail, "end");
  try {
    dict.validate();
  } catch (const std::invalid_argument& e) {
    bad(e.what());
  }
  return dict;
}

void save_checkpoint(const std::string& path, const MultiOutputHead& head) { save_to_path(path, head); }
void save_checkpoint(const std::string& path, const PairwiseHeadDict& dict) { save_to_path(path, dict); }

MultiOutputHead load_general_checkpoint(const std::string& path) {
  return load_from_path<MultiOutputHead>(path, &load_general_checkpoint);
}

PairwiseHeadDict load_pairwise_checkpoint(const std::string& path) {
  return load_from_path<PairwiseHeadDict>(path, &load_pairwise_checkpoint);
}

}  // namespace ferpair
