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
#include <iostream>

#include <CLI11.hpp>

#include "trimodal/error.hpp"
#include "trimodal/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace trimodal;

  CLI::App app{"Tri-modal retrieval encoder: synthetic data, training, evaluation, indexing."};
  app.require_subcommand(1, 1);

  RunOptions opts;
  std::string config, modality, grid;
  std::uint64_t seed = 0;
  std::size_t k = 0;

  for (const auto& name : pipeline_commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed applied to every random stream");
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
    sub->add_flag("--overwrite", opts.overwrite, "Replace existing output files");
    sub->add_option("--modality", modality, "Scoring modality")
        ->check(CLI::IsMember({"dense", "sparse", "colbert", "ensemble"}));
    sub->add_option("--k", k, "Result count")->check(CLI::PositiveNumber);
    if (name == "train") {
      sub->add_option("--grid", grid, "JSON grid of config values to sweep")
          ->check(CLI::ExistingFile);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    if (sub->count("--config")) opts.config = config;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--modality")) opts.modality = parse_modality(modality);
    if (sub->count("--k")) opts.k = k;
    if (opts.command == "train" && sub->count("--grid")) opts.grid = grid;
    run(opts, std::cout);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_status(e);
  }
}
