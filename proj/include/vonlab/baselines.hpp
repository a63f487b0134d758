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
#include <span>
#include <vector>

namespace vonlab::vopt {

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// Heavy-ball with an EMA velocity and decoupled weight decay:
//   v <- beta v + (1 - beta) g;  p <- p - lr (v + wd p)
// With beta = 0 this is plain gradient descent on l + wd/2 |p|^2.
void sgd_step(std::span<double> params, std::span<const double> grad, double lr, double momentum,
              double weight_decay, std::vector<double>& velocity);

struct AdamwConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamwState {
  std::vector<double> params;
  std::vector<double> m1;  // first moment
  std::vector<double> v;   // second moment (running average of squared gradients)
  std::int64_t t = 0;

  explicit AdamwState(std::vector<double> p = {})
      : params(std::move(p)), m1(params.size(), 0.0), v(params.size(), 0.0) {}

  // Bias-corrected second moment.
  std::vector<double> second_moment_debiased(double beta2) const;
};

void adamw_step(AdamwState& state, std::span<const double> grad, double lr, double beta1, double beta2,
                double eps, double weight_decay);

enum class ScheduleKind { constant, warmup_cosine };

struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;
  double floor = 0.0;  // final LR as a fraction of alpha0
};

// Learning rate at step t in [0, total_steps]. Warmup ramps linearly from 0,
// then cosine-decays from alpha0 to floor * alpha0 at total_steps.
double schedule_lr(const Schedule& sched, double alpha0, std::size_t t);

}  // namespace vonlab::vopt
