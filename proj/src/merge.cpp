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

#include <algorithm>
#include <numeric>
#include <string>

#include "vonlab/analysis.hpp"
#include "vonlab/error.hpp"

namespace vonlab::analysis {

models::ParamVector merge_models(const MergeInput& input) {
  const std::size_t n = input.theta0.size();
  require(!input.tasks.empty(), ErrorCode::invalid_argument, "merge: need at least one task");
  require(input.h0.size() == n, ErrorCode::shape, "merge: h0 length does not match theta0");
  for (std::size_t t = 0; t < input.tasks.size(); ++t) {
    const auto& task = input.tasks[t];
    require(task.theta.manifest() == input.theta0.manifest(), ErrorCode::shape,
            "merge: task " + std::to_string(t) + " has a different manifest");
    require(task.h.size() == n, ErrorCode::shape, "merge: task " + std::to_string(t) + " h length mismatch");
    for (double v : task.h) require(v >= 0.0, ErrorCode::invalid_argument, "merge: Hessians must be >= 0");
  }
  for (double v : input.h0) require(v >= 0.0, ErrorCode::invalid_argument, "merge: Hessians must be >= 0");

  std::vector<std::size_t> order(input.tasks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = input.tasks[a];
    const auto& tb = input.tasks[b];
    if (ta.theta.values() != tb.theta.values())
      return std::lexicographical_compare(ta.theta.values().begin(), ta.theta.values().end(),
                                          tb.theta.values().begin(), tb.theta.values().end());
    return std::lexicographical_compare(ta.h.begin(), ta.h.end(), tb.h.begin(), tb.h.end());
  });

  const auto& theta0 = input.theta0.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double denom = input.h0[i];
    for (std::size_t t : order) denom += input.tasks[t].h[i];
    require(denom > 0.0, ErrorCode::numerical,
            "merge: zero Hessian sum at coordinate " + std::to_string(i));
    double weight_sum = 0.0, acc = 0.0;
    for (std::size_t t : order) {
      const double w = (input.h0[i] + input.tasks[t].h[i]) / denom;
      weight_sum += w;
      acc += w * input.tasks[t].theta.values()[i];
    }
    out[i] = (1.0 - weight_sum) * theta0[i] + acc;
  }
  return models::ParamVector(input.theta0.manifest(), std::move(out));
}

}  // namespace vonlab::analysis
