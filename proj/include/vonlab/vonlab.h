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

#ifndef VONLAB_VONLAB_H_
#define VONLAB_VONLAB_H_

/* C interface to libvonlab. Every call returns a vonlab_status; on failure
 * vonlab_last_error() describes the most recent error on the calling thread.
 * Handles are opaque and owned by the caller until passed to *_destroy. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VONLAB_API __declspec(dllexport)
#else
#define VONLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum vonlab_status {
  VONLAB_OK = 0,
  VONLAB_ERR_INTERNAL = 1,
  VONLAB_ERR_CONFIG = 2,     /* invalid configuration, argument or shape */
  VONLAB_ERR_NUMERICAL = 3,  /* divergence or non-finite values */
  VONLAB_ERR_IO = 4
} vonlab_status;

typedef enum vonlab_estimator {
  VONLAB_ESTIMATOR_REPARAM = 0,
  VONLAB_ESTIMATOR_SQ_GRAD = 1,
  VONLAB_ESTIMATOR_GAUSS_NEWTON = 2
} vonlab_estimator;

typedef enum vonlab_field {
  VONLAB_FIELD_M = 0,
  VONLAB_FIELD_H = 1,
  VONLAB_FIELD_G = 2,
  VONLAB_FIELD_SIGMA = 3
} vonlab_field;

typedef struct vonlab_ivon_config {
  double alpha0;
  double beta1;
  double beta2;
  double delta;
  double h0;
  double lambda; /* <= 0: use n_train */
  double xi;     /* <= 0: no clipping */
  int rescale_lr;
  size_t mc_samples;
} vonlab_ivon_config;

typedef struct vonlab_ood_metrics {
  double auroc;
  double fpr_at_95tpr;
  double detection_error;
  double aupr_in;
  double aupr_out;
} vonlab_ood_metrics;

typedef struct vonlab_metrics {
  double accuracy;
  double top_k_accuracy;
  double nll;
  double ece;
  double brier;
} vonlab_metrics;

typedef struct vonlab_ivon vonlab_ivon_t;

VONLAB_API const char* vonlab_version(void);
VONLAB_API const char* vonlab_last_error(void);

/* Library defaults (the same as an empty optimizer config section). */
VONLAB_API void vonlab_ivon_config_default(vonlab_ivon_config* cfg);

/* A flat parameter vector of length n with a single manifest entry. */
VONLAB_API vonlab_status vonlab_ivon_create(const vonlab_ivon_config* cfg, const double* params, size_t n,
                                            double n_train, vonlab_ivon_t** out);
VONLAB_API void vonlab_ivon_destroy(vonlab_ivon_t* opt);

/* Draws theta = m + sigma * eps (n values each) from a stream keyed by
 * (seed, counter). Either output may be NULL. */
VONLAB_API vonlab_status vonlab_ivon_sample(const vonlab_ivon_t* opt, uint64_t seed, uint64_t counter,
                                            double* theta, double* eps);

/* One update with accumulated estimates g_hat and h_hat at learning rate lr. */
VONLAB_API vonlab_status vonlab_ivon_step(vonlab_ivon_t* opt, const double* g_hat, const double* h_hat, double lr);

/* Reparameterization estimate h_hat = g_hat (theta - m) / sigma^2. */
VONLAB_API vonlab_status vonlab_ivon_hessian_reparam(const vonlab_ivon_t* opt, const double* g_hat,
                                                     const double* theta, double* h_hat);

VONLAB_API vonlab_status vonlab_ivon_size(const vonlab_ivon_t* opt, size_t* n);
VONLAB_API vonlab_status vonlab_ivon_steps(const vonlab_ivon_t* opt, int64_t* t);
VONLAB_API vonlab_status vonlab_ivon_get(const vonlab_ivon_t* opt, vonlab_field field, double* out, size_t n);

/* theta_tasks and h_tasks are row-major [n_tasks, n]. */
VONLAB_API vonlab_status vonlab_merge(const double* theta0, const double* h0, const double* theta_tasks,
                                      const double* h_tasks, size_t n_tasks, size_t n, double* out);

/* probs is row-major [n, classes]. */
VONLAB_API vonlab_status vonlab_metrics_compute(const double* probs, const int* labels, size_t n, size_t classes,
                                                size_t top_k, size_t ece_bins, vonlab_metrics* out);
VONLAB_API vonlab_status vonlab_ood_metrics_compute(const double* scores_in, size_t n_in, const double* scores_out,
                                                    size_t n_out, vonlab_ood_metrics* out);

/* Runs a CLI subcommand. out_dir and seed may be NULL. */
VONLAB_API vonlab_status vonlab_run_command(const char* command, const char* config_path, const char* out_dir,
                                            const uint64_t* seed);

#ifdef __cplusplus
}
#endif

#endif /* VONLAB_VONLAB_H_ */
