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
#include <string>
#include <vector>

#include "vonlab/rng.hpp"
#include "vonlab/tape.hpp"
#include "vonlab/tensor.hpp"

namespace vonlab::models {

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  bool operator==(const ManifestEntry&) const = default;
};

using Manifest = std::vector<ManifestEntry>;

// Flat parameter vector with a layer-shape manifest; manifest offsets
// partition [0, size()) in order.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Manifest manifest, std::vector<double> values);
  static ParamVector zeros(Manifest manifest);

  const Manifest& manifest() const noexcept { return manifest_; }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::vector<Tensor> unflatten() const;
  static ParamVector flatten(const Manifest& manifest, std::span<const Tensor> tensors);

  bool operator==(const ParamVector&) const = default;

 private:
  Manifest manifest_;
  std::vector<double> values_;
};

// Throws unless offsets partition [0, total) in manifest order.
void validate_manifest(const Manifest& manifest, std::size_t total);

enum class ModelKind { mlp, logistic };
enum class Activation { relu, tanh };
enum class OutputKind { softmax, scalar };

// layer_widths lists every layer including input and output, e.g. {2, 16, 2}.
// A logistic model has exactly {d, k}.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::relu;
  OutputKind output = OutputKind::softmax;

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t output_dim() const { return layer_widths.back(); }
};

enum class LossKind { crossentropy, mse, quadratic_oracle };

// quadratic_oracle: l(theta) = 1/2 sum_j h_diag[j] (theta_j - target_j)^2 for
// every example, so the batch mean is the same value.
struct LossSpec {
  LossKind kind = LossKind::crossentropy;
  std::vector<double> h_diag;
  std::vector<double> target;
};

void validate(const ModelSpec& spec);
void validate(const LossSpec& loss);

struct Batch {
  Tensor x;                    // [B, d]
  std::vector<int> labels;     // classification
  std::vector<double> targets; // regression

  std::size_t size() const noexcept { return x.rank() == 2 ? x.dim(0) : 0; }
};

Manifest make_manifest(const ModelSpec& spec, const LossSpec& loss);

// Weights ~ N(0, 1/fan_in), biases zero. Quadratic oracles start at zero.
ParamVector init_params(const ModelSpec& spec, const LossSpec& loss, Rng& rng);

struct ForwardPass {
  Tape tape;
  std::vector<Var> params;  // one leaf per manifest entry
  Var output;               // logits / predictions (absent for quadratic oracle)
  Var loss;
  double value = 0.0;
};

// Network outputs on `x`, recorded on `tape`.
Var forward_outputs(Tape& tape, const ModelSpec& spec, std::span<const Var> params, Var x);

// Mean loss over the batch.
ForwardPass forward_loss(const ModelSpec& spec, const LossSpec& loss,
                         std::span<const double> params, const Manifest& manifest, const Batch& batch);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

LossGrad loss_and_grad(const ModelSpec& spec, const LossSpec& loss,
                       std::span<const double> params, const Manifest& manifest, const Batch& batch);

// Flattens leaf gradients of a finished forward pass.
std::vector<double> flat_grad(const ForwardPass& pass);

std::vector<std::vector<double>> per_example_grads(const ModelSpec& spec, const LossSpec& loss,
                                                   std::span<const double> params,
                                                   const Manifest& manifest, const Batch& batch);

// Raw network outputs [B, C] (logits for softmax models).
Tensor predict(const ModelSpec& spec, std::span<const double> params, const Manifest& manifest,
               const Tensor& x);

// Row-wise max-subtracted softmax.
Tensor softmax_rows(const Tensor& logits);

// Jacobian of the C outputs of a single input row w.r.t. all P parameters,
// row-major [P, C].
Tensor output_jacobian(const ModelSpec& spec, std::span<const double> params,
                       const Manifest& manifest, std::span<const double> input_row);

Batch slice(const Batch& batch, std::span<const std::size_t> rows);

}  // namespace vonlab::models
