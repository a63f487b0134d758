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

#include "vonlab/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vonlab/error.hpp"

namespace vonlab::posterior {

GaussianPosterior GaussianPosterior::from_state(const vopt::IvonState& state) { return {state.m, state.sigma}; }

void GaussianPosterior::validate() const {
  require(sigma.size() == m.size(), ErrorCode::shape, "posterior: mean and sigma lengths differ");
  for (double s : sigma)
    require(std::isfinite(s) && s >= 0.0, ErrorCode::invalid_argument, "posterior: sigma must be finite and >= 0");
}

void MixturePosterior::validate() const {
  require(!components.empty(), ErrorCode::invalid_argument, "mixture: needs at least one component");
  for (const auto& c : components) {
    c.validate();
    require(c.m.manifest() == components.front().m.manifest(), ErrorCode::shape,
            "mixture: components have different manifests");
  }
}

namespace {

Tensor outputs_to_prediction(const models::ModelSpec& spec, const Tensor& out) {
  return spec.output == models::OutputKind::softmax ? models::softmax_rows(out) : out;
}

}  // namespace

Tensor predict_at_mean(const models::ModelSpec& spec, const GaussianPosterior& q, const Tensor& x) {
  q.validate();
  return outputs_to_prediction(spec, models::predict(spec, q.m.values(), q.m.manifest(), x));
}

Tensor predict_mc(const models::ModelSpec& spec, const GaussianPosterior& q, const Tensor& x, std::size_t samples,
                  Rng& rng) {
  q.validate();
  require(samples >= 1, ErrorCode::invalid_argument, "predict_mc: need at least one sample");
  Tensor acc;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto w = vopt::sample_weights(q.m.values(), q.sigma, rng);
    const Tensor p = outputs_to_prediction(spec, models::predict(spec, w.theta, q.m.manifest(), x));
    if (s == 0) {
      acc = p;
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(samples);
  if (samples > 1)
    for (auto& v : acc.values()) v *= inv;
  return acc;
}

Tensor mixture_predict(const models::ModelSpec& spec, const MixturePosterior& q, const Tensor& x,
                       std::size_t samples_per_component, Rng& rng) {
  q.validate();
  Tensor acc;
  Rng after = rng;
  for (std::size_t k = 0; k < q.components.size(); ++k) {
    Rng r = rng;
    const Tensor p = predict_mc(spec, q.components[k], x, samples_per_component, r);
    if (k == 0) {
      acc = p;
      after = r;
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i];
    }
  }
  if (q.components.size() > 1) {
    const double inv = 1.0 / static_cast<double>(q.components.size());
    for (auto& v : acc.values()) v *= inv;
  }
  rng = after;
  return acc;
}

std::vector<double> predictive_entropy(const Tensor& probs) {
  const std::size_t r = probs.rows(), c = probs.cols();
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0, h = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = probs[i * c + j];
      require(p >= 0.0 && std::isfinite(p), ErrorCode::invalid_argument,
              "predictive_entropy: row " + std::to_string(i) + " has an invalid probability");
      s += p;
      if (p > 0.0) h -= p * std::log(p);
    }
    require(std::abs(s - 1.0) <= 1e-9, ErrorCode::invalid_argument,
            "predictive_entropy: row " + std::to_string(i) + " does not sum to 1");
    out[i] = h;
  }
  return out;
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  require(bins >= 1 && hi > lo, ErrorCode::invalid_argument, "histogram: need bins >= 1 and hi > lo");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    const double pos = (v - lo) / (hi - lo) * static_cast<double>(bins);
    const auto idx = static_cast<std::ptrdiff_t>(std::floor(pos));
    ++h.counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1))];
  }
  return h;
}

Histogram entropy_histogram(std::span<const double> entropies, std::size_t num_classes) {
  const double hi = num_classes >= 2 ? std::log(static_cast<double>(num_classes)) : 1.0;
  return histogram(entropies, 0.0, hi, 50);
}

}  // namespace vonlab::posterior
