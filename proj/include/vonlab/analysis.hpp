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
#include <optional>
#include <span>
#include <vector>

#include "vonlab/data.hpp"
#include "vonlab/model.hpp"
#include "vonlab/tensor.hpp"
#include "vonlab/train.hpp"

namespace vonlab::analysis {

// ---------------------------------------------------------------------------
// Model merging
// ---------------------------------------------------------------------------

struct MergeTask {
  models::ParamVector theta;
  std::vector<double> h;  // diagonal Hessian, >= 0
};

struct MergeInput {
  models::ParamVector theta0;
  std::vector<double> h0;  // diagonal Hessian of the pretrained model, >= 0
  std::vector<MergeTask> tasks;
};

// theta0 + sum_t w_t (theta_t - theta0) with w_t = (h0 + h_t) / (h0 + sum_t h_t),
// evaluated as (1 - sum_t w_t) theta0 + sum_t w_t theta_t. Tasks are reduced
// in a canonical order, so the result does not depend on their order, and a
// single task is returned bit-exactly.
models::ParamVector merge_models(const MergeInput& input);

// ---------------------------------------------------------------------------
// Sensitivity and leave-one-out estimation
// ---------------------------------------------------------------------------

struct SensitivityRecord {
  std::size_t example_id = 0;
  Tensor variance;                  // V = J^T diag(sigma2) J, [C, C]
  std::vector<double> error;        // e = prediction - target
  std::vector<double> perturbation; // V e, or diag(V) * e in diagonal mode
  double score = 0.0;               // |perturbation|_1
};

// `jacobian` is [P, C]; `prediction` is softmax(f) (or f for scalar models)
// and `target` the one-hot label (or scalar target).
SensitivityRecord sensitivity(const Tensor& jacobian, std::span<const double> sigma2,
                              std::span<const double> prediction, std::span<const double> target,
                              bool diagonal = false, std::size_t example_id = 0);

// Per-example sensitivities of a model at `mean`.
std::vector<SensitivityRecord> sensitivities(const models::ModelSpec& spec, const data::Dataset& ds,
                                             const models::ParamVector& mean, std::span<const double> sigma2,
                                             bool diagonal = false);

struct LooResult {
  double loo = 0.0;         // mean_i l(f_i + V_i e_i)
  double train_loss = 0.0;  // mean_i l(f_i)
};

LooResult loo_estimate(const models::ModelSpec& spec, const models::LossSpec& loss, const data::Dataset& ds,
                       const models::ParamVector& mean, std::span<const double> sigma2, bool diagonal = false);

// Posterior variances: ivon 1/(lambda (h + delta)); sgd 1/(N (1 + delta));
// adamw 1/(N (sqrt(h) + delta)) with h the second-moment vector.
std::vector<double> sigma2_adhoc(vopt::OptimizerKind kind, std::span<const double> h, double n_train, double delta,
                                 double lambda);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct OodMetrics {
  double auroc = 0.0;
  double fpr_at_95tpr = 0.0;
  double detection_error = 0.0;
  double aupr_in = 0.0;
  double aupr_out = 0.0;
};

struct MetricsRecord {
  double accuracy = 0.0;
  double top_k_accuracy = 0.0;
  std::size_t top_k = 5;
  double nll = 0.0;
  double ece = 0.0;
  double brier = 0.0;
  std::optional<OodMetrics> ood;
};

// ECE uses equal-width bins (lo, hi] over the max probability.
MetricsRecord compute_metrics(const Tensor& probs, std::span<const int> labels, std::size_t top_k = 5,
                              std::size_t ece_bins = 15);

double expected_calibration_error(const Tensor& probs, std::span<const int> labels, std::size_t bins);

// Higher score = more out-of-domain. In-domain samples are the positive class
// for TPR/FPR: a sample is called in-domain when its score <= threshold.
OodMetrics compute_ood_metrics(std::span<const double> scores_in, std::span<const double> scores_out);

// P(score_out > score_in) + 0.5 P(tie), via average ranks.
double auroc(std::span<const double> scores_in, std::span<const double> scores_out);

// Area under the precision-recall curve (trapezoidal, starting at (0, 1)),
// ranking by descending `scores` with `positive[i]` marking positives.
double aupr(std::span<const double> scores, const std::vector<bool>& positive);

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace vonlab::analysis
