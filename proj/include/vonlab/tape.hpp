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
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "vonlab/tensor.hpp"

namespace vonlab {

enum class Op {
  leaf,
  matmul,
  add,
  mul,
  relu,
  tanh,
  softmax_crossentropy,
  mse,
  sum,
  scale,
};

std::string_view op_name(Op op);

// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode record of a single forward pass.
//
// Nodes are appended in evaluation order, so the node list is topologically
// sorted by construction. Elementwise ops accept equal shapes, or a rank-1 /
// [1, n] right operand broadcast over the leading batch dimension of a
// [B, n] left operand. Nothing else broadcasts.
class Tape {
 public:
  struct Node {
    Op op = Op::leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    // Saved forward state: softmax probabilities for cross-entropy, the
    // scale factor for `scale`.
    Tensor saved;
    double factor = 0.0;
  };

  Var leaf(Tensor value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var relu(Var a);
  Var tanh(Var a);
  // Mean cross-entropy over rows of `logits` [B, C]; max-subtracted softmax.
  Var softmax_crossentropy(Var logits, std::span<const int> labels);
  // Mean squared error over all elements.
  Var mse(Var pred, Var target);
  Var sum(Var a);
  Var scale(Var a, double c);

  // Generic entry point; `labels` is only consulted by softmax_crossentropy
  // and `factor` only by scale.
  Var forward_op(Op op, std::span<const Var> inputs, std::span<const int> labels = {},
                 double factor = 1.0);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradients of a scalar output with respect to every node, indexed by node
  // id. Nodes that do not influence the output get zero tensors.
  std::vector<Tensor> backward(Var output, double seed_grad = 1.0) const;

  // Vector-Jacobian product: seeds the output with an arbitrary cotangent of
  // the output's shape. Used for per-output Jacobians.
  std::vector<Tensor> backward_seeded(Var output, const Tensor& seed) const;

 private:
  Var push(Node node);
  const Tensor& val(std::size_t id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
};

// Central-difference gradient of `loss` at `params`, one coordinate at a time.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::span<const double> params, double step);

}  // namespace vonlab
