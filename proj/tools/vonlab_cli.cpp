/*
 * Copyright 2026 The vonlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vonlab/vonlab.h"

int main(int argc, char** argv) {
  CLI::App app{"vonlab: variational online Newton experiments"};
  app.set_version_flag("--version", std::string(vonlab_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  const char* commands[][2] = {{"train", "train a model and write checkpoint, trace and metrics"},
                               {"eval", "evaluate a checkpoint at the configured MC sample counts"},
                               {"merge", "Hessian-weighted merge of task checkpoints"},
                               {"sensitivity", "per-example sensitivities and LOO estimates"},
                               {"ood", "out-of-domain detection by predictive entropy"},
                               {"ablate-estimators", "train once per Hessian estimator"},
                               {"plot", "render a CSV as an SVG histogram or line plot"}};
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "run seed (overrides seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const std::uint64_t seed_value = seed.value_or(0);
  const vonlab_status st =
      vonlab_run_command(command.c_str(), config.c_str(), out.empty() ? nullptr : out.c_str(), seed ? &seed_value : nullptr);
  if (st != VONLAB_OK) std::fprintf(stderr, "vonlab %s: %s\n", command.c_str(), vonlab_last_error());
  return static_cast<int>(st);
}
