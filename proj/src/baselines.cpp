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

#include "vonlab/baselines.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vonlab/error.hpp"

namespace vonlab::vopt {

void sgd_step(std::span<double> params, std::span<const double> grad, double lr, double momentum,
              double weight_decay, std::vector<double>& velocity) {
  require(grad.size() == params.size(), ErrorCode::shape, "sgd_step: gradient length mismatch");
  if (velocity.size() != params.size()) velocity.assign(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + (1.0 - momentum) * grad[i];
    params[i] -= lr * (velocity[i] + weight_decay * params[i]);
  }
}

std::vector<double> AdamwState::second_moment_debiased(double beta2) const {
  std::vector<double> out(v.size());
  const double c = t > 0 ? 1.0 - std::pow(beta2, static_cast<double>(t)) : 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / c;
  return out;
}

void adamw_step(AdamwState& s, std::span<const double> grad, double lr, double beta1, double beta2, double eps,
                double weight_decay) {
  require(grad.size() == s.params.size(), ErrorCode::shape, "adamw_step: gradient length mismatch");
  s.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    s.m1[i] = beta1 * s.m1[i] + (1.0 - beta1) * grad[i];
    s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = s.m1[i] / c1;
    const double v_hat = s.v[i] / c2;
    s.params[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * s.params[i]);
  }
}

double schedule_lr(const Schedule& sched, double alpha0, std::size_t t) {
  if (sched.kind == ScheduleKind::constant) return alpha0;
  require(sched.warmup_steps <= sched.total_steps, ErrorCode::config,
          "schedule: warmup_steps exceeds total_steps");
  require(t <= sched.total_steps, ErrorCode::invalid_argument,
          "schedule: step " + std::to_string(t) + " outside [0, " + std::to_string(sched.total_steps) + "]");
  if (t < sched.warmup_steps)
    return alpha0 * static_cast<double>(t) / static_cast<double>(sched.warmup_steps);
  const std::size_t span = sched.total_steps - sched.warmup_steps;
  if (span == 0) return alpha0;
  const double progress = static_cast<double>(t - sched.warmup_steps) / static_cast<double>(span);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return alpha0 * (sched.floor + (1.0 - sched.floor) * cosine);
}

}  // namespace vonlab::vopt
