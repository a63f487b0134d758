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

#include "vonlab/vonlab.h"

#include <algorithm>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "vonlab/analysis.hpp"
#include "vonlab/error.hpp"
#include "vonlab/experiment.hpp"
#include "vonlab/ivon.hpp"

struct vonlab_ivon {
  vonlab::vopt::IvonConfig cfg;
  vonlab::vopt::IvonState state;
};

namespace {

thread_local std::string g_last_error;

vonlab_status status_of(vonlab::ErrorCode code) {
  switch (code) {
    case vonlab::ErrorCode::invalid_argument:
    case vonlab::ErrorCode::config:
    case vonlab::ErrorCode::shape: return VONLAB_ERR_CONFIG;
    case vonlab::ErrorCode::divergence:
    case vonlab::ErrorCode::numerical: return VONLAB_ERR_NUMERICAL;
    case vonlab::ErrorCode::io: return VONLAB_ERR_IO;
  }
  return VONLAB_ERR_INTERNAL;
}

template <class Fn>
vonlab_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VONLAB_OK;
  } catch (const vonlab::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return VONLAB_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  vonlab::require(p != nullptr, vonlab::ErrorCode::invalid_argument, std::string(what) + " is NULL");
}

vonlab::models::Manifest flat_manifest(std::size_t n) { return {{"params", {n}, 0}}; }

}  // namespace

extern "C" {

const char* vonlab_version(void) { return "0.1.0"; }

const char* vonlab_last_error(void) { return g_last_error.c_str(); }

void vonlab_ivon_config_default(vonlab_ivon_config* cfg) {
  if (!cfg) return;
  const vonlab::vopt::IvonConfig d;
  *cfg = {d.alpha0, d.beta1, d.beta2, d.delta, d.h0, 0.0, 0.0, d.rescale_lr ? 1 : 0, d.mc_samples};
}

vonlab_status vonlab_ivon_create(const vonlab_ivon_config* cfg, const double* params, size_t n, double n_train,
                                 vonlab_ivon_t** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    vonlab::require(n == 0 || params, vonlab::ErrorCode::invalid_argument, "params is NULL");
    *out = nullptr;
    auto opt = std::make_unique<vonlab_ivon>();
    auto& c = opt->cfg;
    c.alpha0 = cfg->alpha0;
    c.beta1 = cfg->beta1;
    c.beta2 = cfg->beta2;
    c.delta = cfg->delta;
    c.h0 = cfg->h0;
    if (cfg->lambda > 0.0) c.lambda = cfg->lambda;
    if (cfg->xi > 0.0) c.xi = cfg->xi;
    c.rescale_lr = cfg->rescale_lr != 0;
    c.mc_samples = cfg->mc_samples;
    vonlab::vopt::validate(c);
    vonlab::models::ParamVector p(flat_manifest(n), std::vector<double>(params, params + n));
    opt->state = vonlab::vopt::ivon_init(p, c, n_train > 0.0 ? std::optional<double>(n_train) : std::nullopt);
    *out = opt.release();
  });
}

void vonlab_ivon_destroy(vonlab_ivon_t* opt) { delete opt; }

vonlab_status vonlab_ivon_sample(const vonlab_ivon_t* opt, uint64_t seed, uint64_t counter, double* theta,
                                 double* eps) {
  return guarded([&] {
    need(opt, "opt");
    vonlab::Rng rng(seed, counter, 0);
    const auto w = vonlab::vopt::sample_weights(opt->state, rng);
    if (theta) std::copy(w.theta.begin(), w.theta.end(), theta);
    if (eps) std::copy(w.eps.begin(), w.eps.end(), eps);
  });
}

vonlab_status vonlab_ivon_step(vonlab_ivon_t* opt, const double* g_hat, const double* h_hat, double lr) {
  return guarded([&] {
    need(opt, "opt");
    const std::size_t n = opt->state.size();
    vonlab::require(n == 0 || (g_hat && h_hat), vonlab::ErrorCode::invalid_argument, "g_hat/h_hat is NULL");
    vonlab::vopt::ivon_step(opt->state, std::span<const double>(g_hat, n), std::span<const double>(h_hat, n), lr,
                            opt->cfg);
  });
}

vonlab_status vonlab_ivon_hessian_reparam(const vonlab_ivon_t* opt, const double* g_hat, const double* theta,
                                          double* h_hat) {
  return guarded([&] {
    need(opt, "opt");
    const std::size_t n = opt->state.size();
    vonlab::require(n == 0 || (g_hat && theta && h_hat), vonlab::ErrorCode::invalid_argument, "NULL buffer");
    const auto h = vonlab::vopt::estimate_hessian_reparam(std::span<const double>(g_hat, n),
                                                          std::span<const double>(theta, n), opt->state.m.values(),
                                                          opt->state.sigma);
    std::copy(h.begin(), h.end(), h_hat);
  });
}

vonlab_status vonlab_ivon_size(const vonlab_ivon_t* opt, size_t* n) {
  return guarded([&] {
    need(opt, "opt");
    need(n, "n");
    *n = opt->state.size();
  });
}

vonlab_status vonlab_ivon_steps(const vonlab_ivon_t* opt, int64_t* t) {
  return guarded([&] {
    need(opt, "opt");
    need(t, "t");
    *t = opt->state.t;
  });
}

vonlab_status vonlab_ivon_get(const vonlab_ivon_t* opt, vonlab_field field, double* out, size_t n) {
  return guarded([&] {
    need(opt, "opt");
    const auto& s = opt->state;
    vonlab::require(n == s.size(), vonlab::ErrorCode::shape,
                    "buffer holds " + std::to_string(n) + " values, state has " + std::to_string(s.size()));
    vonlab::require(n == 0 || out, vonlab::ErrorCode::invalid_argument, "out is NULL");
    const std::vector<double>* src = nullptr;
    switch (field) {
      case VONLAB_FIELD_M: src = &s.m.values(); break;
      case VONLAB_FIELD_H: src = &s.h; break;
      case VONLAB_FIELD_G: src = &s.g; break;
      case VONLAB_FIELD_SIGMA: src = &s.sigma; break;
    }
    need(src, "field");
    std::copy(src->begin(), src->end(), out);
  });
}

vonlab_status vonlab_merge(const double* theta0, const double* h0, const double* theta_tasks, const double* h_tasks,
                           size_t n_tasks, size_t n, double* out) {
  return guarded([&] {
    vonlab::require(n == 0 || (theta0 && h0 && out), vonlab::ErrorCode::invalid_argument, "NULL buffer");
    vonlab::require(n_tasks == 0 || n == 0 || (theta_tasks && h_tasks), vonlab::ErrorCode::invalid_argument,
                    "NULL task buffer");
    const auto manifest = flat_manifest(n);
    vonlab::analysis::MergeInput in{vonlab::models::ParamVector(manifest, std::vector<double>(theta0, theta0 + n)),
                                    std::vector<double>(h0, h0 + n),
                                    {}};
    for (std::size_t t = 0; t < n_tasks; ++t)
      in.tasks.push_back({vonlab::models::ParamVector(manifest, std::vector<double>(theta_tasks + t * n,
                                                                                   theta_tasks + (t + 1) * n)),
                          std::vector<double>(h_tasks + t * n, h_tasks + (t + 1) * n)});
    const auto merged = vonlab::analysis::merge_models(in);
    std::copy(merged.values().begin(), merged.values().end(), out);
  });
}

vonlab_status vonlab_metrics_compute(const double* probs, const int* labels, size_t n, size_t classes, size_t top_k,
                                     size_t ece_bins, vonlab_metrics* out) {
  return guarded([&] {
    need(probs, "probs");
    need(labels, "labels");
    need(out, "out");
    const vonlab::Tensor p = vonlab::Tensor::matrix(n, classes, std::vector<double>(probs, probs + n * classes));
    const auto m = vonlab::analysis::compute_metrics(p, std::span<const int>(labels, n), top_k, ece_bins);
    *out = {m.accuracy, m.top_k_accuracy, m.nll, m.ece, m.brier};
  });
}

vonlab_status vonlab_ood_metrics_compute(const double* scores_in, size_t n_in, const double* scores_out, size_t n_out,
                                         vonlab_ood_metrics* out) {
  return guarded([&] {
    need(scores_in, "scores_in");
    need(scores_out, "scores_out");
    need(out, "out");
    const auto m = vonlab::analysis::compute_ood_metrics(std::span<const double>(scores_in, n_in),
                                                         std::span<const double>(scores_out, n_out));
    *out = {m.auroc, m.fpr_at_95tpr, m.detection_error, m.aupr_in, m.aupr_out};
  });
}

vonlab_status vonlab_run_command(const char* command, const char* config_path, const char* out_dir,
                                 const uint64_t* seed) {
  return guarded([&] {
    need(command, "command");
    need(config_path, "config_path");
    vonlab::cli::RunOptions opts;
    opts.config = config_path;
    if (out_dir) opts.out_dir = std::filesystem::path(out_dir);
    if (seed) opts.seed = *seed;
    vonlab::cli::run_command(command, opts);
  });
}

}  // extern "C"
