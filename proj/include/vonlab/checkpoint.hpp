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
#include <optional>
#include <string>
#include <vector>

#include "vonlab/data.hpp"
#include "vonlab/model.hpp"
#include "vonlab/train.hpp"

namespace vonlab::vopt {

// On disk a checkpoint is a pair of files sharing a stem:
//   <stem>.bin   little-endian f64 arrays m, h, g (each P values, in order)
//   <stem>.json  {lambda, delta, beta1, beta2, h0, xi, t, manifest, ...}
// For sgd checkpoints h is zero and g holds the velocity; for adamw h holds
// the raw second moment and g the first moment.
struct Checkpoint {
  OptimizerKind optimizer = OptimizerKind::ivon;
  models::ParamVector m;
  std::vector<double> h;
  std::vector<double> g;
  double lambda = 1.0;
  double delta = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double h0 = 0.0;
  std::optional<double> xi;
  std::int64_t t = 0;

  std::optional<models::ModelSpec> model;
  std::optional<models::LossSpec> loss;
  std::size_t n_train = 0;
  data::Standardizer standardizer;

  // sigma = 1 / sqrt(lambda (h + delta)).
  std::vector<double> sigma() const;
};

Checkpoint make_checkpoint(const TrainState& state, const OptimizerConfig& cfg, const models::ModelSpec& spec,
                           const models::LossSpec& loss, std::size_t n_train, const data::Standardizer& standardizer);

// Rebuilds an IVON optimizer state (sigma derived from h, delta, lambda).
IvonState ivon_state(const Checkpoint& ckpt);

// `path` may name the stem, the .bin file or the .json file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_stem(const std::filesystem::path& path);

}  // namespace vonlab::vopt
