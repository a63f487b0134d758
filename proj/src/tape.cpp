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

#include "vonlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vonlab/error.hpp"

namespace vonlab {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::mul: return "mul";
    case Op::relu: return "relu";
    case Op::tanh: return "tanh";
    case Op::softmax_crossentropy: return "softmax_crossentropy";
    case Op::mse: return "mse";
    case Op::sum: return "sum";
    case Op::scale: return "scale";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_mismatch(Op op, const Shape& a, const Shape& b) {
  fail(ErrorCode::shape, std::string(op_name(op)) + ": shape mismatch " + shape_to_string(a) +
                             " vs " + shape_to_string(b));
}

// True when `b` is broadcast along the leading dimension of `a`.
bool broadcasts(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) return false;
  const std::size_t n = a.dim(1);
  return (b.rank() == 1 && b.dim(0) == n) || (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == n);
}

void check_elementwise(Op op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return;
  if (broadcasts(a, b)) return;
  shape_mismatch(op, a.shape(), b.shape());
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = val(a.id);
  const Tensor& y = val(b.id);
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) shape_mismatch(Op::matmul, x.shape(), y.shape());
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += xv * y[p * n + j];
    }
  }
  Node node;
  node.op = Op::matmul;
  node.inputs = {a.id, b.id};
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = val(a.id);
  const Tensor& y = val(b.id);
  check_elementwise(Op::add, x, y);
  Tensor out = x;
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i % n];
  Node node;
  node.op = Op::add;
  node.inputs = {a.id, b.id};
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = val(a.id);
  const Tensor& y = val(b.id);
  check_elementwise(Op::mul, x, y);
  Tensor out = x;
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i % n];
  Node node;
  node.op = Op::mul;
  node.inputs = {a.id, b.id};
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::relu(Var a) {
  Tensor out = val(a.id);
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  Node node;
  node.op = Op::relu;
  node.inputs = {a.id};
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::tanh(Var a) {
  Tensor out = val(a.id);
  for (auto& v : out.values()) v = std::tanh(v);
  Node node;
  node.op = Op::tanh;
  node.inputs = {a.id};
  node.value = std::move(out);
  return push(std::move(node));
}

Var Tape::softmax_crossentropy(Var logits, std::span<const int> labels) {
  const Tensor& z = val(logits.id);
  if (z.rank() != 2 || z.dim(0) != labels.size()) {
    shape_mismatch(Op::softmax_crossentropy, z.shape(), Shape{labels.size()});
  }
  const std::size_t b = z.dim(0), c = z.dim(1);
  Tensor probs({b, c});
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < c, ErrorCode::shape,
            "softmax_crossentropy: label " + std::to_string(y) + " out of range for " +
                std::to_string(c) + " classes");
    double mx = z[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(z[i * c + j] - mx);
      probs[i * c + j] = e;
      s += e;
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= s;
    total += std::log(s) + mx - z[i * c + static_cast<std::size_t>(y)];
  }
  Node node;
  node.op = Op::softmax_crossentropy;
  node.inputs = {logits.id};
  node.value = Tensor::scalar(total / static_cast<double>(b));
  // Probabilities with the one-hot target already subtracted: the gradient.
  for (std::size_t i = 0; i < b; ++i) probs[i * c + static_cast<std::size_t>(labels[i])] -= 1.0;
  node.saved = std::move(probs);
  return push(std::move(node));
}

Var Tape::mse(Var pred, Var target) {
  const Tensor& p = val(pred.id);
  const Tensor& t = val(target.id);
  if (p.shape() != t.shape()) shape_mismatch(Op::mse, p.shape(), t.shape());
  require(p.size() > 0, ErrorCode::shape, "mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    s += d * d;
  }
  Node node;
  node.op = Op::mse;
  node.inputs = {pred.id, target.id};
  node.value = Tensor::scalar(s / static_cast<double>(p.size()));
  return push(std::move(node));
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : val(a.id).values()) s += v;
  Node node;
  node.op = Op::sum;
  node.inputs = {a.id};
  node.value = Tensor::scalar(s);
  return push(std::move(node));
}

Var Tape::scale(Var a, double c) {
  Tensor out = val(a.id);
  for (auto& v : out.values()) v *= c;
  Node node;
  node.op = Op::scale;
  node.inputs = {a.id};
  node.value = std::move(out);
  node.factor = c;
  return push(std::move(node));
}

Var Tape::forward_op(Op op, std::span<const Var> in, std::span<const int> labels, double factor) {
  auto need = [&](std::size_t n) {
    require(in.size() == n, ErrorCode::invalid_argument,
            std::string(op_name(op)) + ": expected " + std::to_string(n) + " inputs, got " +
                std::to_string(in.size()));
  };
  switch (op) {
    case Op::leaf: fail(ErrorCode::invalid_argument, "forward_op: use leaf() to create leaves");
    case Op::matmul: need(2); return matmul(in[0], in[1]);
    case Op::add: need(2); return add(in[0], in[1]);
    case Op::mul: need(2); return mul(in[0], in[1]);
    case Op::relu: need(1); return relu(in[0]);
    case Op::tanh: need(1); return tanh(in[0]);
    case Op::softmax_crossentropy: need(1); return softmax_crossentropy(in[0], labels);
    case Op::mse: need(2); return mse(in[0], in[1]);
    case Op::sum: need(1); return sum(in[0]);
    case Op::scale: need(1); return scale(in[0], factor);
  }
  fail(ErrorCode::invalid_argument, "forward_op: unknown op");
}

std::vector<Tensor> Tape::backward(Var output, double seed_grad) const {
  const Tensor& out = val(output.id);
  require(out.size() == 1, ErrorCode::shape,
          "backward: output must be scalar, got shape " + shape_to_string(out.shape()));
  return backward_seeded(output, Tensor(out.shape(), {seed_grad}));
}

std::vector<Tensor> Tape::backward_seeded(Var output, const Tensor& seed) const {
  require(output.id < nodes_.size(), ErrorCode::invalid_argument, "backward: unknown node");
  require(seed.shape() == val(output.id).shape(), ErrorCode::shape,
          "backward: seed shape " + shape_to_string(seed.shape()) + " does not match output " +
              shape_to_string(val(output.id).shape()));

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  grads[output.id] = seed;
  live[output.id] = true;

  auto acc = [&](std::size_t id) -> Tensor& {
    if (!live[id]) {
      grads[id] = Tensor::zeros(val(id).shape());
      live[id] = true;
    }
    return grads[id];
  };

  for (std::size_t idx = output.id + 1; idx-- > 0;) {
    if (!live[idx]) continue;
    const Node& node = nodes_[idx];
    const Tensor& g = grads[idx];
    switch (node.op) {
      case Op::leaf: break;
      case Op::matmul: {
        const Tensor& x = val(node.inputs[0]);
        const Tensor& y = val(node.inputs[1]);
        const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
        Tensor& gx = acc(node.inputs[0]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y[p * n + j];
            gx[i * k + p] += s;
          }
        Tensor& gy = acc(node.inputs[1]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double xv = x[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gy[p * n + j] += xv * g[i * n + j];
          }
        break;
      }
      case Op::add: {
        Tensor& ga = acc(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        Tensor& gb = acc(node.inputs[1]);
        const std::size_t n = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
        break;
      }
      case Op::mul: {
        const Tensor& x = val(node.inputs[0]);
        const Tensor& y = val(node.inputs[1]);
        const std::size_t n = y.size();
        Tensor& ga = acc(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i % n];
        Tensor& gb = acc(node.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i] * x[i];
        break;
      }
      case Op::relu: {
        const Tensor& x = val(node.inputs[0]);
        Tensor& ga = acc(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::tanh: {
        Tensor& ga = acc(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double t = node.value[i];
          ga[i] += g[i] * (1.0 - t * t);
        }
        break;
      }
      case Op::softmax_crossentropy: {
        Tensor& ga = acc(node.inputs[0]);
        const double w = g[0] / static_cast<double>(node.saved.dim(0));
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w * node.saved[i];
        break;
      }
      case Op::mse: {
        const Tensor& p = val(node.inputs[0]);
        const Tensor& t = val(node.inputs[1]);
        const double w = 2.0 * g[0] / static_cast<double>(p.size());
        Tensor& gp = acc(node.inputs[0]);
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += w * (p[i] - t[i]);
        Tensor& gt = acc(node.inputs[1]);
        for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= w * (p[i] - t[i]);
        break;
      }
      case Op::sum: {
        Tensor& ga = acc(node.inputs[0]);
        for (auto& v : ga.values()) v += g[0];
        break;
      }
      case Op::scale: {
        Tensor& ga = acc(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.factor * g[i];
        break;
      }
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!live[i]) grads[i] = Tensor::zeros(val(i).shape());
  return grads;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss,
                                     std::span<const double> params, double step) {
  require(step > 0.0, ErrorCode::invalid_argument, "finite_diff_grad: step must be positive");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = loss(x);
    x[i] = orig - step;
    const double down = loss(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace vonlab
