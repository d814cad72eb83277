// Copyright 2026 The PSIC Authors. All rights reserved.
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

// Command-line front end. Kept as a library so tests can drive it in-process.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include <nlohmann/json.hpp>

#include "psic/eval.hpp"
#include "psic/oracle.hpp"
#include "psic/trainer.hpp"

namespace psic::cli {

enum ExitCode : int {
  kOk = 0,
  kOtherError = 1,
  kConfigError = 2,
  kDataError = 3,
  kDivergence = 4,
  kContainerError = 5,
};

inline constexpr const char* kCheckpointDirEnv = "PSIC_CHECKPOINT_DIR";

/// Sections of a --config file. Every section is optional.
struct RunConfig {
  train::TrainConfig train;
  oracle::SurrogateConfig oracle;
  eval::EvalConfig eval;
};

/// Throws ConfigError on unknown sections or bad values.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::optional<std::filesystem::path>& path);

/// Runs one invocation and maps failures onto ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace psic::cli
