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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vonlab/data.hpp"
#include "vonlab/model.hpp"
#include "vonlab/train.hpp"

namespace vonlab::cli {

struct DataConfig {
  std::string generator = "two_moons";  // two_moons | blobs | inbetween_1d | constant | csv
  std::map<std::string, double> params;
  std::vector<std::vector<double>> centers;  // blobs
  std::filesystem::path csv_path;
  data::LabelKind csv_labels = data::LabelKind::class_index;
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
  bool standardize = false;

  double param(const std::string& key, double fallback) const;
};

struct EvalConfig {
  std::vector<std::size_t> mc_samples{1};
  std::size_t ece_bins = 15;
  std::optional<std::size_t> top_k;  // default min(5, classes)
};

struct ExperimentConfig {
  int schema_version = 1;
  models::ModelSpec model;
  models::LossSpec loss;
  vopt::OptimizerConfig optimizer;
  std::size_t devices = 1;
  DataConfig data;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  EvalConfig eval;
  std::filesystem::path output_dir;
  bool checkpoint_every_epoch = false;
};

// Relative paths inside a config resolve against the config file's directory.
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Generates (or loads) the dataset, splits it and, when configured, fits the
// standardizer on the training part and applies it to both parts.
struct PreparedData {
  data::Split split;
  data::Standardizer standardizer;
};
PreparedData prepare_data(const DataConfig& cfg);

// Raw dataset before splitting; `seed_override` replaces the generator seed.
data::Dataset generate(const DataConfig& cfg, std::optional<std::uint64_t> seed_override = {});

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out_dir;  // overrides output_dir
  std::optional<std::uint64_t> seed;             // overrides the run seed
};

void cmd_train(const RunOptions& opts);
void cmd_eval(const RunOptions& opts);
void cmd_merge(const RunOptions& opts);
void cmd_sensitivity(const RunOptions& opts);
void cmd_ood(const RunOptions& opts);
void cmd_ablate_estimators(const RunOptions& opts);
void cmd_plot(const RunOptions& opts);

// Dispatches by subcommand name; unknown names are config errors.
void run_command(const std::string& name, const RunOptions& opts);

}  // namespace vonlab::cli
