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

#include "vonlab/model.hpp"

#include <algorithm>
#include <cmath>

#include "vonlab/error.hpp"

namespace vonlab::models {

ParamVector::ParamVector(Manifest manifest, std::vector<double> values)
    : manifest_(std::move(manifest)), values_(std::move(values)) {
  validate_manifest(manifest_, values_.size());
}

ParamVector ParamVector::zeros(Manifest manifest) {
  std::size_t total = 0;
  for (const auto& e : manifest) total += shape_numel(e.shape);
  return ParamVector(std::move(manifest), std::vector<double>(total, 0.0));
}

std::vector<Tensor> ParamVector::unflatten() const {
  std::vector<Tensor> out;
  out.reserve(manifest_.size());
  for (const auto& e : manifest_) {
    const std::size_t n = shape_numel(e.shape);
    out.emplace_back(e.shape, std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(e.offset),
                                                  values_.begin() + static_cast<std::ptrdiff_t>(e.offset + n)));
  }
  return out;
}

ParamVector ParamVector::flatten(const Manifest& manifest, std::span<const Tensor> tensors) {
  require(manifest.size() == tensors.size(), ErrorCode::shape, "flatten: tensor count does not match manifest");
  std::vector<double> values;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    require(tensors[i].shape() == manifest[i].shape, ErrorCode::shape,
            "flatten: " + manifest[i].name + " expects " + shape_to_string(manifest[i].shape) + ", got " +
                shape_to_string(tensors[i].shape()));
    values.insert(values.end(), tensors[i].values().begin(), tensors[i].values().end());
  }
  return ParamVector(manifest, std::move(values));
}

void validate_manifest(const Manifest& manifest, std::size_t total) {
  std::size_t offset = 0;
  for (const auto& e : manifest) {
    require(e.offset == offset, ErrorCode::shape,
            "manifest: entry " + e.name + " at offset " + std::to_string(e.offset) + ", expected " +
                std::to_string(offset));
    offset += shape_numel(e.shape);
  }
  require(offset == total, ErrorCode::shape,
          "manifest: covers " + std::to_string(offset) + " values but vector has " + std::to_string(total));
}

void validate(const ModelSpec& spec) {
  require(spec.layer_widths.size() >= 2, ErrorCode::config, "model: layer_widths needs input and output widths");
  for (auto w : spec.layer_widths) require(w >= 1, ErrorCode::config, "model: layer widths must be >= 1");
  if (spec.kind == ModelKind::logistic)
    require(spec.layer_widths.size() == 2, ErrorCode::config, "model: logistic has no hidden layers");
  if (spec.output == OutputKind::scalar)
    require(spec.output_dim() == 1, ErrorCode::config, "model: scalar output needs final width 1");
}

void validate(const LossSpec& loss) {
  if (loss.kind != LossKind::quadratic_oracle) return;
  require(!loss.h_diag.empty(), ErrorCode::config, "loss: quadratic_oracle needs h_diag");
  require(loss.h_diag.size() == loss.target.size(), ErrorCode::config,
          "loss: h_diag and target lengths differ");
  for (double h : loss.h_diag) require(h > 0.0, ErrorCode::config, "loss: quadratic_oracle requires h_diag > 0");
}

Manifest make_manifest(const ModelSpec& spec, const LossSpec& loss) {
  Manifest m;
  if (loss.kind == LossKind::quadratic_oracle) {
    m.push_back({"theta", {loss.h_diag.size()}, 0});
    return m;
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const std::size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
    m.push_back({"layer" + std::to_string(l) + ".weight", {in, out}, offset});
    offset += in * out;
    m.push_back({"layer" + std::to_string(l) + ".bias", {out}, offset});
    offset += out;
  }
  return m;
}

ParamVector init_params(const ModelSpec& spec, const LossSpec& loss, Rng& rng) {
  validate(loss);
  if (loss.kind != LossKind::quadratic_oracle) validate(spec);
  ParamVector p = ParamVector::zeros(make_manifest(spec, loss));
  if (loss.kind == LossKind::quadratic_oracle) return p;
  for (const auto& e : p.manifest()) {
    if (e.shape.size() != 2) continue;
    const double std = 1.0 / std::sqrt(static_cast<double>(e.shape[0]));
    const std::size_t n = shape_numel(e.shape);
    for (std::size_t i = 0; i < n; ++i) p.values()[e.offset + i] = std * rng.gaussian();
  }
  return p;
}

namespace {

std::vector<Var> push_params(Tape& tape, std::span<const double> params, const Manifest& manifest) {
  validate_manifest(manifest, params.size());
  std::vector<Var> vars;
  vars.reserve(manifest.size());
  for (const auto& e : manifest) {
    const std::size_t n = shape_numel(e.shape);
    vars.push_back(tape.leaf(Tensor(e.shape, std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(e.offset),
                                                                params.begin() + static_cast<std::ptrdiff_t>(e.offset + n)))));
  }
  return vars;
}

}  // namespace

Var forward_outputs(Tape& tape, const ModelSpec& spec, std::span<const Var> params, Var x) {
  const std::size_t layers = spec.layer_widths.size() - 1;
  require(params.size() == 2 * layers, ErrorCode::shape, "forward: parameter count does not match model");
  const Tensor& xv = tape.value(x);
  require(xv.rank() == 2 && xv.dim(1) == spec.input_dim(), ErrorCode::shape,
          "forward: input shape " + shape_to_string(xv.shape()) + " does not match feature dim " +
              std::to_string(spec.input_dim()));
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.add(tape.matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers) h = spec.activation == Activation::relu ? tape.relu(h) : tape.tanh(h);
  }
  return h;
}

ForwardPass forward_loss(const ModelSpec& spec, const LossSpec& loss, std::span<const double> params,
                         const Manifest& manifest, const Batch& batch) {
  require(batch.size() > 0, ErrorCode::shape, "forward_loss: empty batch");
  ForwardPass pass;
  pass.params = push_params(pass.tape, params, manifest);
  Tape& t = pass.tape;
  switch (loss.kind) {
    case LossKind::quadratic_oracle: {
      const std::size_t n = loss.h_diag.size();
      std::vector<double> neg(n), half(n);
      for (std::size_t i = 0; i < n; ++i) {
        neg[i] = -loss.target[i];
        half[i] = 0.5 * loss.h_diag[i];
      }
      const Var d = t.add(pass.params.at(0), t.leaf(Tensor::vector(std::move(neg))));
      pass.loss = t.sum(t.mul(t.mul(d, d), t.leaf(Tensor::vector(std::move(half)))));
      pass.output = pass.loss;
      break;
    }
    case LossKind::crossentropy: {
      require(spec.output == OutputKind::softmax, ErrorCode::config, "crossentropy needs a softmax model");
      require(batch.labels.size() == batch.size(), ErrorCode::shape, "forward_loss: label count mismatch");
      pass.output = forward_outputs(t, spec, pass.params, t.leaf(batch.x));
      pass.loss = t.softmax_crossentropy(pass.output, batch.labels);
      break;
    }
    case LossKind::mse: {
      require(batch.targets.size() == batch.size(), ErrorCode::shape, "forward_loss: target count mismatch");
      pass.output = forward_outputs(t, spec, pass.params, t.leaf(batch.x));
      const Var target = t.leaf(Tensor({batch.size(), 1}, batch.targets));
      pass.loss = t.mse(pass.output, target);
      break;
    }
  }
  pass.value = t.value(pass.loss).item();
  return pass;
}

std::vector<double> flat_grad(const ForwardPass& pass) {
  const auto grads = pass.tape.backward(pass.loss);
  std::vector<double> out;
  for (const Var v : pass.params) out.insert(out.end(), grads[v.id].values().begin(), grads[v.id].values().end());
  return out;
}

LossGrad loss_and_grad(const ModelSpec& spec, const LossSpec& loss, std::span<const double> params,
                       const Manifest& manifest, const Batch& batch) {
  const ForwardPass pass = forward_loss(spec, loss, params, manifest, batch);
  return {pass.value, flat_grad(pass)};
}

Batch slice(const Batch& batch, std::span<const std::size_t> rows) {
  const std::size_t d = batch.x.dim(1);
  Batch out;
  out.x = Tensor({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(batch.x.values().begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                out.x.values().begin() + static_cast<std::ptrdiff_t>(r * d));
    if (!batch.labels.empty()) out.labels.push_back(batch.labels[rows[r]]);
    if (!batch.targets.empty()) out.targets.push_back(batch.targets[rows[r]]);
  }
  return out;
}

std::vector<std::vector<double>> per_example_grads(const ModelSpec& spec, const LossSpec& loss,
                                                   std::span<const double> params, const Manifest& manifest,
                                                   const Batch& batch) {
  require(batch.size() > 0, ErrorCode::shape, "per_example_grads: empty batch");
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t row[1] = {i};
    out.push_back(loss_and_grad(spec, loss, params, manifest, slice(batch, row)).grad);
  }
  return out;
}

Tensor predict(const ModelSpec& spec, std::span<const double> params, const Manifest& manifest, const Tensor& x) {
  Tape tape;
  const auto vars = push_params(tape, params, manifest);
  const Var out = forward_outputs(tape, spec, vars, tape.leaf(x));
  return tape.value(out);
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = logits;
  const std::size_t r = logits.rows(), c = logits.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = p[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, p[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[i * c + j] = std::exp(p[i * c + j] - mx);
      s += p[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) p[i * c + j] /= s;
  }
  return p;
}

Tensor output_jacobian(const ModelSpec& spec, std::span<const double> params, const Manifest& manifest,
                       std::span<const double> input_row) {
  Tape tape;
  const auto vars = push_params(tape, params, manifest);
  const Var x = tape.leaf(Tensor({1, input_row.size()}, std::vector<double>(input_row.begin(), input_row.end())));
  const Var out = forward_outputs(tape, spec, vars, x);
  const std::size_t c = tape.value(out).size();
  const std::size_t p = params.size();
  Tensor jac({p, c});
  for (std::size_t k = 0; k < c; ++k) {
    Tensor seed({1, c});
    seed[k] = 1.0;
    const auto grads = tape.backward_seeded(out, seed);
    std::size_t row = 0;
    for (const Var v : vars)
      for (double g : grads[v.id].values()) jac[(row++) * c + k] = g;
  }
  return jac;
}

}  // namespace vonlab::models
