// Copyright 2026-present the trimodal authors
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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "trimodal/config.hpp"

namespace trimodal {

struct RunOptions {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = ".";
  bool overwrite = false;
  std::optional<Modality> modality;
  std::optional<std::size_t> k;
  /// JSON object of {section: {key: [values...]}} for a train grid sweep.
  std::optional<std::filesystem::path> grid;
};

const std::vector<std::string>& pipeline_commands();

/// Resolves the effective configuration: defaults, then the config file,
/// then command-line overrides.
PipelineConfig resolve_config(const RunOptions& options);

/// Executes one subcommand, writing artifacts under options.out and a short
/// human-readable summary to `log`. Throws Error subclasses on failure.
void run(const RunOptions& options, std::ostream& log);

/// Maps an exception from run() to the process exit status.
int exit_status(const std::exception& e);

}  // namespace trimodal
