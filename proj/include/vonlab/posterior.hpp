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
#include <span>
#include <vector>

#include "vonlab/ivon.hpp"
#include "vonlab/model.hpp"
#include "vonlab/rng.hpp"
#include "vonlab/tensor.hpp"

namespace vonlab::posterior {

// q(theta) = N(m, diag(sigma^2)).
struct GaussianPosterior {
  models::ParamVector m;
  std::vector<double> sigma;

  static GaussianPosterior from_state(const vopt::IvonState& state);
  void validate() const;
};

// Uniformly weighted mixture of Gaussian posteriors over one manifest.
struct MixturePosterior {
  std::vector<GaussianPosterior> components;

  void validate() const;
};

// Softmax probabilities (or raw outputs for scalar models) at the mean.
Tensor predict_at_mean(const models::ModelSpec& spec, const GaussianPosterior& q, const Tensor& x);

// Average over S weight samples of per-sample probabilities (outputs for
// scalar models). Draws P normals per sample from `rng`, in sample order.
Tensor predict_mc(const models::ModelSpec& spec, const GaussianPosterior& q, const Tensor& x, std::size_t samples,
                  Rng& rng);

// Uniform average of per-component predict_mc. Every component starts from
// the same position of `rng` (common random numbers); on return `rng` is
// advanced as if one component had been evaluated.
Tensor mixture_predict(const models::ModelSpec& spec, const MixturePosterior& q, const Tensor& x,
                       std::size_t samples_per_component, Rng& rng);

// Per-row entropy in nats with 0 ln 0 = 0. Rows must be distributions
// (sum 1 within 1e-9, entries >= 0).
std::vector<double> predictive_entropy(const Tensor& probs);

struct Histogram {
  std::vector<double> edges;  // bins + 1 values
  std::vector<std::size_t> counts;
};

// Equal-width bins on [lo, hi]; values at hi land in the last bin, values
// outside are clamped into the edge bins.
Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

// 50 bins over [0, ln k].
Histogram entropy_histogram(std::span<const double> entropies, std::size_t num_classes);

}  // namespace vonlab::posterior
