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

#include <cmath>
#include <string>

#include "vonlab/analysis.hpp"
#include "vonlab/error.hpp"

namespace vonlab::analysis {

SensitivityRecord sensitivity(const Tensor& jacobian, std::span<const double> sigma2,
                              std::span<const double> prediction, std::span<const double> target, bool diagonal,
                              std::size_t example_id) {
  require(jacobian.rank() == 2, ErrorCode::shape, "sensitivity: jacobian must be [P, C]");
  const std::size_t p = jacobian.dim(0), c = jacobian.dim(1);
  require(sigma2.size() == p, ErrorCode::shape,
          "sensitivity: sigma2 has " + std::to_string(sigma2.size()) + " entries, jacobian has " +
              std::to_string(p) + " rows");
  require(prediction.size() == c && target.size() == c, ErrorCode::shape,
          "sensitivity: prediction/target must have " + std::to_string(c) + " entries");
  for (double s : sigma2) require(s >= 0.0, ErrorCode::invalid_argument, "sensitivity: sigma2 must be >= 0");

  SensitivityRecord r;
  r.example_id = example_id;
  r.variance = Tensor({c, c});
  for (std::size_t k = 0; k < p; ++k) {
    const double s = sigma2[k];
    if (s == 0.0) continue;
    for (std::size_t a = 0; a < c; ++a) {
      const double ja = jacobian[k * c + a] * s;
      if (ja == 0.0) continue;
      for (std::size_t b = 0; b < c; ++b) r.variance[a * c + b] += ja * jacobian[k * c + b];
    }
  }
  r.error.resize(c);
  for (std::size_t a = 0; a < c; ++a) r.error[a] = prediction[a] - target[a];
  r.perturbation.assign(c, 0.0);
  for (std::size_t a = 0; a < c; ++a) {
    if (diagonal) {
      r.perturbation[a] = r.variance[a * c + a] * r.error[a];
    } else {
      for (std::size_t b = 0; b < c; ++b) r.perturbation[a] += r.variance[a * c + b] * r.error[b];
    }
    r.score += std::abs(r.perturbation[a]);
  }
  return r;
}

namespace {

std::vector<double> target_vector(const data::Dataset& ds, std::size_t i, std::size_t c) {
  std::vector<double> y(c, 0.0);
  if (ds.label_kind == data::LabelKind::class_index) {
    const auto label = static_cast<std::size_t>(ds.labels[i]);
    require(label < c, ErrorCode::shape, "sensitivity: label out of range");
    y[label] = 1.0;
  } else {
    y[0] = ds.targets[i];
  }
  return y;
}

double crossentropy(std::span<const double> logits, std::size_t label) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  return std::log(s) + mx - logits[label];
}

}  // namespace

std::vector<SensitivityRecord> sensitivities(const models::ModelSpec& spec, const data::Dataset& ds,
                                             const models::ParamVector& mean, std::span<const double> sigma2,
                                             bool diagonal) {
  require(ds.size() > 0, ErrorCode::invalid_argument, "sensitivities: empty dataset");
  const std::size_t d = ds.dim();
  const Tensor outputs = models::predict(spec, mean.values(), mean.manifest(), ds.x);
  const Tensor pred = spec.output == models::OutputKind::softmax ? models::softmax_rows(outputs) : outputs;
  const std::size_t c = outputs.cols();
  std::vector<SensitivityRecord> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::span<const double> row(ds.x.values().data() + i * d, d);
    const Tensor jac = models::output_jacobian(spec, mean.values(), mean.manifest(), row);
    const auto y = target_vector(ds, i, c);
    out.push_back(sensitivity(jac, sigma2, std::span<const double>(pred.values().data() + i * c, c), y, diagonal, i));
  }
  return out;
}

LooResult loo_estimate(const models::ModelSpec& spec, const models::LossSpec& loss, const data::Dataset& ds,
                       const models::ParamVector& mean, std::span<const double> sigma2, bool diagonal) {
  require(loss.kind != models::LossKind::quadratic_oracle, ErrorCode::invalid_argument,
          "loo_estimate: needs a data-dependent loss");
  const auto records = sensitivities(spec, ds, mean, sigma2, diagonal);
  const Tensor outputs = models::predict(spec, mean.values(), mean.manifest(), ds.x);
  const std::size_t c = outputs.cols();
  LooResult r;
  std::vector<double> shifted(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::span<const double> f(outputs.values().data() + i * c, c);
    for (std::size_t a = 0; a < c; ++a) shifted[a] = f[a] + records[i].perturbation[a];
    if (loss.kind == models::LossKind::crossentropy) {
      const auto y = static_cast<std::size_t>(ds.labels[i]);
      r.train_loss += crossentropy(f, y);
      r.loo += crossentropy(shifted, y);
    } else {
      const double e0 = f[0] - ds.targets[i];
      const double e1 = shifted[0] - ds.targets[i];
      r.train_loss += e0 * e0;
      r.loo += e1 * e1;
    }
  }
  r.train_loss /= static_cast<double>(ds.size());
  r.loo /= static_cast<double>(ds.size());
  return r;
}

std::vector<double> sigma2_adhoc(vopt::OptimizerKind kind, std::span<const double> h, double n_train, double delta,
                                 double lambda) {
  std::vector<double> out(h.size());
  switch (kind) {
    case vopt::OptimizerKind::ivon:
      for (std::size_t i = 0; i < h.size(); ++i) out[i] = 1.0 / (lambda * (h[i] + delta));
      break;
    case vopt::OptimizerKind::sgd:
      require(n_train > 0.0, ErrorCode::invalid_argument, "sigma2: N must be > 0");
      for (auto& v : out) v = 1.0 / (n_train * (1.0 + delta));
      break;
    case vopt::OptimizerKind::adamw:
      require(n_train > 0.0, ErrorCode::invalid_argument, "sigma2: N must be > 0");
      for (std::size_t i = 0; i < h.size(); ++i) out[i] = 1.0 / (n_train * (std::sqrt(h[i]) + delta));
      break;
  }
  return out;
}

}  // namespace vonlab::analysis
