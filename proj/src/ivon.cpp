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

#include "vonlab/ivon.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "vonlab/error.hpp"

namespace vonlab::vopt {

std::string_view estimator_name(HessianEstimator e) {
  switch (e) {
    case HessianEstimator::reparam: return "reparam";
    case HessianEstimator::sq_grad: return "sq_grad";
    case HessianEstimator::gauss_newton: return "gauss_newton";
  }
  return "unknown";
}

HessianEstimator parse_estimator(std::string_view name) {
  if (name == "reparam") return HessianEstimator::reparam;
  if (name == "sq_grad") return HessianEstimator::sq_grad;
  if (name == "gauss_newton") return HessianEstimator::gauss_newton;
  fail(ErrorCode::config, "unknown hessian estimator '" + std::string(name) + "'");
}

void validate(const IvonConfig& cfg) {
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0, ErrorCode::config, "ivon: beta1 must be in [0, 1)");
  require(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0, ErrorCode::config, "ivon: beta2 must be in [0, 1)");
  require(cfg.delta > 0.0, ErrorCode::config, "ivon: delta must be > 0");
  require(cfg.h0 > 0.0, ErrorCode::config, "ivon: h0 must be > 0");
  require(!cfg.lambda || *cfg.lambda > 0.0, ErrorCode::config, "ivon: lambda must be > 0");
  require(!cfg.xi || *cfg.xi > 0.0, ErrorCode::config, "ivon: xi must be > 0");
  require(!(cfg.xi && cfg.rescale_lr), ErrorCode::config, "ivon: rescale_lr cannot be combined with clipping");
  require(cfg.mc_samples >= 1, ErrorCode::config, "ivon: mc_samples must be >= 1");
}

std::vector<double> posterior_sigma(std::span<const double> h, double delta, double lambda) {
  std::vector<double> s(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) s[i] = 1.0 / std::sqrt(lambda * (h[i] + delta));
  return s;
}

IvonState ivon_init(const models::ParamVector& params, const IvonConfig& cfg, std::optional<double> n_train) {
  validate(cfg);
  require(cfg.lambda.has_value() || n_train.has_value(), ErrorCode::config,
          "ivon: lambda unset and no training-set size available");
  IvonState s;
  s.m = params;
  s.lambda = cfg.lambda.value_or(n_train.value_or(1.0));
  s.h.assign(params.size(), cfg.h0);
  s.g.assign(params.size(), 0.0);
  s.sigma = posterior_sigma(s.h, cfg.delta, s.lambda);
  s.lr_scale = cfg.rescale_lr ? cfg.h0 + cfg.delta : 1.0;
  return s;
}

double effective_lr(const IvonState& state, double alpha_t) { return state.lr_scale * alpha_t; }

WeightSample sample_weights(std::span<const double> m, std::span<const double> sigma, Rng& rng) {
  require(m.size() == sigma.size(), ErrorCode::shape, "sample_weights: mean and sigma lengths differ");
  WeightSample w;
  w.eps = rng.gaussian_vector(m.size());
  w.theta.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) w.theta[i] = m[i] + sigma[i] * w.eps[i];
  return w;
}

WeightSample sample_weights(const IvonState& state, Rng& rng) {
  return sample_weights(state.m.values(), state.sigma, rng);
}

std::vector<double> estimate_hessian_reparam(std::span<const double> g_hat, std::span<const double> theta,
                                             std::span<const double> m, std::span<const double> sigma) {
  const std::size_t n = g_hat.size();
  require(theta.size() == n && m.size() == n && sigma.size() == n, ErrorCode::shape,
          "estimate_hessian_reparam: length mismatch");
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = g_hat[i] * (theta[i] - m[i]) / (sigma[i] * sigma[i]);
  return h;
}

std::vector<double> estimate_hessian_sq(std::span<const double> g_hat) {
  std::vector<double> h(g_hat.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = g_hat[i] * g_hat[i];
  return h;
}

std::vector<double> estimate_hessian_gn(const std::vector<std::vector<double>>& grads) {
  require(!grads.empty(), ErrorCode::invalid_argument, "estimate_hessian_gn: empty batch");
  const std::size_t n = grads.front().size();
  std::vector<double> h(n, 0.0);
  for (const auto& g : grads) {
    require(g.size() == n, ErrorCode::shape, "estimate_hessian_gn: length mismatch");
    for (std::size_t i = 0; i < n; ++i) h[i] += g[i] * g[i];
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (auto& v : h) v *= inv;
  return h;
}

std::vector<double> accumulation_weights(std::span<const std::size_t> batch_sizes) {
  std::uint64_t total = 0;
  for (auto b : batch_sizes) {
    require(b >= 1, ErrorCode::invalid_argument, "accumulate: batch sizes must be >= 1");
    total += b;
  }
  std::vector<double> alpha(batch_sizes.size());
  double partial = 0.0;
  for (std::size_t k = 0; k + 1 < batch_sizes.size(); ++k) {
    alpha[k] = static_cast<double>(batch_sizes[k]) / static_cast<double>(total);
    partial += alpha[k];
  }
  if (!alpha.empty()) alpha.back() = 1.0 - partial;
  return alpha;
}

Accumulated accumulate(std::vector<GradHessSample> samples, std::size_t mc_samples) {
  require(!samples.empty(), ErrorCode::invalid_argument, "accumulate: no samples");
  require(mc_samples >= 1, ErrorCode::invalid_argument, "accumulate: S must be >= 1");
  std::sort(samples.begin(), samples.end(), [](const GradHessSample& a, const GradHessSample& b) {
    return a.device != b.device ? a.device < b.device : a.sample < b.sample;
  });
  const std::size_t n = samples.front().g_hat.size();
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_device;  // count, batch size
  std::vector<std::size_t> sizes;
  for (const auto& s : samples) {
    require(s.g_hat.size() == n && s.h_hat.size() == n, ErrorCode::shape, "accumulate: mismatched lengths");
    auto [it, inserted] = per_device.try_emplace(s.device, 0, s.batch_size);
    require(it->second.second == s.batch_size, ErrorCode::invalid_argument,
            "accumulate: device " + std::to_string(s.device) + " reports inconsistent batch sizes");
    ++it->second.first;
    sizes.push_back(s.batch_size);
  }
  for (const auto& [dev, info] : per_device)
    require(info.first == mc_samples, ErrorCode::invalid_argument,
            "accumulate: device " + std::to_string(dev) + " has " + std::to_string(info.first) +
                " samples, expected " + std::to_string(mc_samples));

  const auto alpha = accumulation_weights(sizes);
  Accumulated out;
  out.g_hat.assign(n, 0.0);
  out.h_hat.assign(n, 0.0);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double a = alpha[k];
    for (std::size_t i = 0; i < n; ++i) {
      out.g_hat[i] += a * samples[k].g_hat[i];
      out.h_hat[i] += a * samples[k].h_hat[i];
    }
    out.loss += a * samples[k].loss;
  }
  return out;
}

double ivon_h_update(double h, double h_hat, double beta2, double delta) {
  // beta2 h + (1-beta2) h_hat + (1-beta2)^2 (h - h_hat)^2 / (2 (h + delta)),
  // written as a completed square in a = h + delta:
  //   a/2 + (a - rho (h - h_hat))^2 / (2a) - delta,
  // which keeps h + delta >= a/2 under rounding.
  const double rho = 1.0 - beta2;
  const double a = h + delta;
  const double r = a - rho * (h - h_hat);
  return 0.5 * a + (r * r) / (2.0 * a) - delta;
}

std::vector<double> ivon_step(IvonState& state, std::span<const double> g_hat, std::span<const double> h_hat,
                              double alpha_t, const IvonConfig& cfg) {
  const std::size_t n = state.size();
  require(g_hat.size() == n && h_hat.size() == n, ErrorCode::shape,
          "ivon_step: expected " + std::to_string(n) + " coordinates");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(g_hat[i]) || !std::isfinite(h_hat[i]))
      fail(ErrorCode::numerical, "ivon_step: non-finite gradient/hessian estimate at coordinate " +
                                     std::to_string(i) + " (step " + std::to_string(state.t + 1) + ")");
  }
  const double delta = cfg.delta;
  const double lr = effective_lr(state, alpha_t);
  state.t += 1;
  const double debias = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  std::vector<double> direction(n);
  auto& m = state.m.values();
  for (std::size_t i = 0; i < n; ++i) {
    state.g[i] = cfg.beta1 * state.g[i] + (1.0 - cfg.beta1) * g_hat[i];
    state.h[i] = ivon_h_update(state.h[i], h_hat[i], cfg.beta2, delta);
    const double g_bar = state.g[i] / debias;
    const double precision = state.h[i] + delta;
    const double decay = delta * (m[i] - cfg.prior_mean);
    double d;
    if (cfg.xi && cfg.clip_mode == ClipMode::before_decay) {
      d = std::clamp(g_bar / precision, -*cfg.xi, *cfg.xi) + decay / precision;
    } else {
      d = (g_bar + decay) / precision;
      if (cfg.xi) d = std::clamp(d, -*cfg.xi, *cfg.xi);
    }
    direction[i] = d;
    m[i] -= lr * d;
    state.sigma[i] = 1.0 / std::sqrt(state.lambda * precision);
  }
  return direction;
}

}  // namespace vonlab::vopt
