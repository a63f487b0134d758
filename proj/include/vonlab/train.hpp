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
#include <functional>
#include <string_view>
#include <vector>

#include "vonlab/baselines.hpp"
#include "vonlab/data.hpp"
#include "vonlab/ivon.hpp"
#include "vonlab/model.hpp"
#include "vonlab/rng.hpp"

namespace vonlab::vopt {

enum class OptimizerKind { ivon, sgd, adamw };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::ivon;
  IvonConfig ivon;
  SgdConfig sgd;
  AdamwConfig adamw;
  Schedule schedule;  // total_steps == 0 means "epochs * batches per epoch"

  double base_lr() const;
};

struct TrainState {
  OptimizerKind kind = OptimizerKind::ivon;
  IvonState ivon;
  models::ParamVector params;  // current point for sgd / adamw
  std::vector<double> velocity;
  AdamwState adamw;
  std::int64_t step = 0;

  const models::ParamVector& mean() const { return kind == OptimizerKind::ivon ? ivon.m : params; }
};

TrainState init_state(const models::ParamVector& params, const OptimizerConfig& cfg, std::size_t n_train);

struct TraceRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double min_h = 0.0;
  double max_h = 0.0;
  double grad_norm = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  // Each minibatch is split into this many contiguous shards ("devices"),
  // each evaluated with its own S weight samples.
  std::size_t devices = 1;
  // Workers for the per-(device, sample) evaluations. Results do not depend
  // on this value.
  std::size_t threads = 1;
  std::function<void(std::size_t epoch, const TrainState&)> on_epoch_end;
};

struct TrainResult {
  TrainState state;
  std::vector<TraceRow> trace;
};

// Noise for (step, device j, sample s) is drawn from counter range
// hi = step, lo in [k P, (k+1) P) with k = j S + s, under a key derived from
// `rng`. Throws DivergenceError with the 0-based step index when a loss or
// estimate turns non-finite.
TrainResult train_loop(const models::ModelSpec& spec, const models::LossSpec& loss, const data::Dataset& ds,
                       const OptimizerConfig& cfg, const TrainOptions& opts, const models::ParamVector& init,
                       const Rng& rng);

// Noise key used by train_loop, exposed so tests can replay draws.
Rng training_noise_stream(const Rng& rng);

// Key for the per-epoch batch order: epoch e shuffles with
// batch_stream(rng).at(e).next_u64().
Rng batch_stream(const Rng& rng);

// Contiguous shard sizes for splitting `batch` rows over `devices`.
std::vector<std::size_t> shard_sizes(std::size_t batch, std::size_t devices);

}  // namespace vonlab::vopt
