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

#include <iosfwd>
#include <string>

#include "ferpair/heads.hpp"

namespace ferpair {

// Line-oriented text container, format version 1. Layout is documented in
// docs/checkpoint-format.md. Values are written in shortest round-trip form,
// so save followed by load is exact.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const MultiOutputHead& head);
void save_checkpoint(std::ostream& out, const PairwiseHeadDict& dict);

MultiOutputHead load_general_checkpoint(std::istream& in);
PairwiseHeadDict load_pairwise_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const MultiOutputHead& head);
void save_checkpoint(const std::string& path, const PairwiseHeadDict& dict);
MultiOutputHead load_general_checkpoint(const std::string& path);
PairwiseHeadDict load_pairwise_checkpoint(const std::string& path);

}  // namespace ferpair
