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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vonlab/model.hpp"
#include "vonlab/rng.hpp"

namespace vonlab::vopt {

enum class HessianEstimator { reparam, sq_grad, gauss_newton };

std::string_view estimator_name(HessianEstimator e);
HessianEstimator parse_estimator(std::string_view name);

// Where clipping of the update direction happens.
//   full_direction: clip (g_bar + delta (m - prior)) / (h + delta).
//   before_decay:   clip g_bar / (h + delta), then add the decay term unclipped.
enum class ClipMode { full_direction, before_decay };

struct IvonConfig {
  double alpha0 = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99999;
  double delta = 1e-4;
  double h0 = 0.1;
  std::optional<double> lambda;  // effective sample size; defaults to N
  std::optional<double> xi;      // elementwise clip radius
  bool rescale_lr = false;       // multiply alpha_t by (h0 + delta); not allowed with xi
  std::size_t mc_samples = 1;
  HessianEstimator estimator = HessianEstimator::reparam;
  ClipMode clip_mode = ClipMode::full_direction;
  double prior_mean = 0.0;
};

void validate(const IvonConfig& cfg);

struct IvonState {
  models::ParamVector m;
  std::vector<double> h;
  std::vector<double> g;
  std::vector<double> sigma;
  std::int64_t t = 0;
  double lambda = 1.0;
  double lr_scale = 1.0;  // (h0 + delta) when rescale_lr is set

  std::size_t size() const noexcept { return m.size(); }
};

// n_train is used for lambda when the config leaves it unset.
IvonState ivon_init(const models::ParamVector& params, const IvonConfig& cfg, std::optional<double> n_train = {});

// sigma = 1 / sqrt(lambda (h + delta)), elementwise.
std::vector<double> posterior_sigma(std::span<const double> h, double delta, double lambda);

double effective_lr(const IvonState& state, double alpha_t);

struct WeightSample {
  std::vector<double> theta;
  std::vector<double> eps;
};

// theta = m + sigma * eps with eps drawn from `rng` (one draw per coordinate).
WeightSample sample_weights(const IvonState& state, Rng& rng);
WeightSample sample_weights(std::span<const double> m, std::span<const double> sigma, Rng& rng);

std::vector<double> estimate_hessian_reparam(std::span<const double> g_hat, std::span<const double> theta,
                                             std::span<const double> m, std::span<const double> sigma);
std::vector<double> estimate_hessian_sq(std::span<const double> g_hat);
std::vector<double> estimate_hessian_gn(const std::vector<std::vector<double>>& per_example_grads);

struct GradHessSample {
  std::vector<double> g_hat;
  std::vector<double> h_hat;
  std::size_t batch_size = 1;
  std::size_t device = 0;
  std::size_t sample = 0;
  double loss = 0.0;
};

// Weights alpha_j = B_j / sum_j S B_j for each sample, in (device, sample)
// order. The last weight absorbs rounding so that their ordered sum is
// exactly 1.0 in double precision.
std::vector<double> accumulation_weights(std::span<const std::size_t> batch_sizes_per_sample);

struct Accumulated {
  std::vector<double> g_hat;
  std::vector<double> h_hat;
  double loss = 0.0;
};

// Weighted sum over all (device, sample) pairs, reduced in sorted
// (device, sample) order. Every device must contribute exactly S samples.
Accumulated accumulate(std::vector<GradHessSample> samples, std::size_t mc_samples);

// One IVON step, updating `state` in place. Returns the applied update
// direction (after clipping). Throws without modifying `state` when g_hat or
// h_hat contain non-finite values.
std::vector<double> ivon_step(IvonState& state, std::span<const double> g_hat, std::span<const double> h_hat,
                              double alpha_t, const IvonConfig& cfg);

// The h recursion for one coordinate.
double ivon_h_update(double h, double h_hat, double beta2, double delta);

}  // namespace vonlab::vopt
