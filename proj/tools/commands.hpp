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
#include <string_view>
#include <vector>

#include "ferpair/datamodel.hpp"

namespace ferpair::cli {

enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Class counts of a named synth preset. `scale` applies to affectnet-skew
/// only (rounded half up).
ClassCounts profile_counts(std::string_view profile, double scale = 1.0);

/// Runs one command line (without the program name). Diagnostics go to err,
/// short summaries to out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ferpair::cli
