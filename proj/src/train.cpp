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

#include "vonlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vonlab/error.hpp"
#include "vonlab/parallel.hpp"

namespace vonlab::vopt {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365;
constexpr std::uint64_t kBatchStream = 0x6261746368;

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::string_view optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::ivon: return "ivon";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adamw: return "adamw";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "ivon") return OptimizerKind::ivon;
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adamw") return OptimizerKind::adamw;
  fail(ErrorCode::config, "unknown optimizer kind '" + std::string(name) + "'");
}

double OptimizerConfig::base_lr() const {
  switch (kind) {
    case OptimizerKind::ivon: return ivon.alpha0;
    case OptimizerKind::sgd: return sgd.lr;
    case OptimizerKind::adamw: return adamw.lr;
  }
  return 0.0;
}

TrainState init_state(const models::ParamVector& params, const OptimizerConfig& cfg, std::size_t n_train) {
  TrainState s;
  s.kind = cfg.kind;
  s.params = params;
  switch (cfg.kind) {
    case OptimizerKind::ivon:
      s.ivon = ivon_init(params, cfg.ivon, static_cast<double>(n_train));
      break;
    case OptimizerKind::sgd:
      s.velocity.assign(params.size(), 0.0);
      break;
    case OptimizerKind::adamw:
      s.adamw = AdamwState(params.values());
      break;
  }
  return s;
}

Rng training_noise_stream(const Rng& rng) { return rng.split(kNoiseStream); }

Rng batch_stream(const Rng& rng) { return rng.split(kBatchStream); }

std::vector<std::size_t> shard_sizes(std::size_t batch, std::size_t devices) {
  const std::size_t j = std::max<std::size_t>(1, std::min(devices, batch));
  std::vector<std::size_t> sizes(j, batch / j);
  for (std::size_t k = 0; k < batch % j; ++k) ++sizes[k];
  return sizes;
}

TrainResult train_loop(const models::ModelSpec& spec, const models::LossSpec& loss, const data::Dataset& ds,
                       const OptimizerConfig& cfg, const TrainOptions& opts, const models::ParamVector& init,
                       const Rng& rng) {
  require(ds.size() > 0, ErrorCode::invalid_argument, "train_loop: empty dataset");
  require(opts.batch_size >= 1, ErrorCode::config, "train_loop: batch_size must be >= 1");
  require(opts.devices >= 1, ErrorCode::config, "train_loop: devices must be >= 1");

  TrainResult result{init_state(init, cfg, ds.size()), {}};
  TrainState& st = result.state;
  const models::Manifest& manifest = init.manifest();
  const std::size_t n_params = init.size();
  const models::Batch full = ds.as_batch();
  const Rng noise = training_noise_stream(rng);
  const Rng batch_rng = batch_stream(rng);

  Schedule sched = cfg.schedule;
  const std::size_t per_epoch = (ds.size() + opts.batch_size - 1) / opts.batch_size;
  if (sched.total_steps == 0) sched.total_steps = opts.epochs * per_epoch;
  sched.total_steps = std::max(sched.total_steps, sched.warmup_steps);
  const std::size_t S = cfg.kind == OptimizerKind::ivon ? cfg.ivon.mc_samples : 1;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto plan = data::batches(ds, opts.batch_size, batch_rng.at(epoch).next_u64());
    for (const auto& rows : plan) {
      const std::int64_t step = st.step;
      const double alpha = schedule_lr(sched, cfg.base_lr(), std::min<std::size_t>(step + 1, sched.total_steps));
      const models::Batch batch = models::slice(full, rows);
      TraceRow row;
      row.step = step;
      row.lr = alpha;

      if (cfg.kind == OptimizerKind::ivon) {
        IvonState& iv = st.ivon;
        const auto sizes = shard_sizes(batch.size(), opts.devices);
        std::vector<models::Batch> shards;
        std::size_t begin = 0;
        for (auto sz : sizes) {
          std::vector<std::size_t> idx(sz);
          for (std::size_t k = 0; k < sz; ++k) idx[k] = begin + k;
          shards.push_back(models::slice(batch, idx));
          begin += sz;
        }
        std::vector<GradHessSample> samples(sizes.size() * S);
        parallel_for(samples.size(), opts.threads, [&](std::size_t k) {
          const std::size_t j = k / S, s = k % S;
          Rng r = noise.at(static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(k) * n_params);
          const WeightSample w = sample_weights(iv, r);
          const models::ForwardPass pass = models::forward_loss(spec, loss, w.theta, manifest, shards[j]);
          GradHessSample& out = samples[k];
          out.device = j;
          out.sample = s;
          out.batch_size = sizes[j];
          out.loss = pass.value;
          out.g_hat = models::flat_grad(pass);
          switch (cfg.ivon.estimator) {
            case HessianEstimator::reparam:
              out.h_hat = estimate_hessian_reparam(out.g_hat, w.theta, iv.m.values(), iv.sigma);
              break;
            case HessianEstimator::sq_grad:
              out.h_hat = estimate_hessian_sq(out.g_hat);
              break;
            case HessianEstimator::gauss_newton:
              out.h_hat = estimate_hessian_gn(models::per_example_grads(spec, loss, w.theta, manifest, shards[j]));
              break;
          }
        });
        for (const auto& s : samples)
          if (!std::isfinite(s.loss))
            throw DivergenceError(step, "non-finite loss at step " + std::to_string(step));
        const Accumulated acc = accumulate(std::move(samples), S);
        try {
          ivon_step(iv, acc.g_hat, acc.h_hat, alpha, cfg.ivon);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::numerical) throw;
          throw DivergenceError(step, e.what());
        }
        row.loss = acc.loss;
        row.lr = effective_lr(iv, alpha);
        row.grad_norm = l2(acc.g_hat);
        row.min_h = *std::min_element(iv.h.begin(), iv.h.end());
        row.max_h = *std::max_element(iv.h.begin(), iv.h.end());
      } else {
        const models::LossGrad lg = models::loss_and_grad(spec, loss, st.params.values(), manifest, batch);
        if (!std::isfinite(lg.loss)) throw DivergenceError(step, "non-finite loss at step " + std::to_string(step));
        if (cfg.kind == OptimizerKind::sgd) {
          sgd_step(st.params.values(), lg.grad, alpha, cfg.sgd.momentum, cfg.sgd.weight_decay, st.velocity);
          row.min_h = row.max_h = 0.0;
        } else {
          const auto& a = cfg.adamw;
          adamw_step(st.adamw, lg.grad, alpha, a.beta1, a.beta2, a.eps, a.weight_decay);
          st.params.values() = st.adamw.params;
          row.min_h = *std::min_element(st.adamw.v.begin(), st.adamw.v.end());
          row.max_h = *std::max_element(st.adamw.v.begin(), st.adamw.v.end());
        }
        for (double v : st.params.values())
          if (!std::isfinite(v)) throw DivergenceError(step, "non-finite parameters at step " + std::to_string(step));
        row.loss = lg.loss;
        row.grad_norm = l2(lg.grad);
      }
      result.trace.push_back(row);
      ++st.step;
    }
    if (opts.on_epoch_end) opts.on_epoch_end(epoch + 1, st);
  }
  return result;
}

}  // namespace vonlab::vopt
