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
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vonlab/baselines.hpp"
#include "vonlab/data.hpp"
#include "vonlab/error.hpp"
#include "vonlab/ivon.hpp"
#include "vonlab/train.hpp"

namespace vonlab::vopt {
namespace {

models::ParamVector flat(std::vector<double> v) {
  const std::size_t n = v.size();
  return models::ParamVector({{"w", {n}, 0}}, std::move(v));
}

IvonConfig quad_cfg() {
  IvonConfig c;
  c.beta1 = 0.9;
  c.beta2 = 0.9995;
  c.delta = 0.5;
  c.h0 = 1.0;
  c.lambda = 10.0;
  c.mc_samples = 4;
  return c;
}

TEST(IvonInit, SigmaFromPrecision) {
  IvonConfig c;
  c.h0 = 0.9;
  c.delta = 0.1;
  c.lambda = 1000.0;
  const auto s = ivon_init(flat({0.0, 1.0}), c);
  for (double v : s.sigma) EXPECT_NEAR(v, 0.0316228, 1e-7);
  EXPECT_EQ(s.h, (std::vector<double>{0.9, 0.9}));
  EXPECT_EQ(s.g, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(s.t, 0);
}

TEST(IvonInit, LambdaDefaultsToTrainingSetSize) {
  const IvonConfig c;
  EXPECT_EQ(ivon_init(flat({0.0}), c, 250.0).lambda, 250.0);
  EXPECT_THROW(ivon_init(flat({0.0}), c), Error);
}

TEST(IvonInit, RescaledLearningRate) {
  IvonConfig c;
  c.h0 = 0.5;
  c.delta = 0.5;
  c.alpha0 = 1.0;
  c.rescale_lr = true;
  c.lambda = 1.0;
  const auto s = ivon_init(flat({0.0}), c);
  EXPECT_EQ(effective_lr(s, c.alpha0), 1.0);
}

TEST(IvonInit, RejectsNonPositivePrecision) {
  IvonConfig c;
  c.lambda = 1.0;
  c.h0 = 0.0;
  EXPECT_THROW(validate(c), Error);
  c.h0 = 0.1;
  c.delta = 0.0;
  EXPECT_THROW(validate(c), Error);
  c.delta = 1e-4;
  c.xi = 1.0;
  c.rescale_lr = true;
  EXPECT_THROW(validate(c), Error);
  c.rescale_lr = false;
  c.beta2 = 1.0;
  EXPECT_THROW(validate(c), Error);
}

TEST(SampleWeights, ZeroSigmaIsTheMean) {
  const std::vector<double> m{0.5, -2.0, 3.0}, sigma(3, 0.0);
  Rng rng(1);
  EXPECT_EQ(sample_weights(m, sigma, rng).theta, m);
}

TEST(SampleWeights, Reproducible) {
  const std::vector<double> m{0.5, -2.0}, sigma{0.1, 0.3};
  Rng a(9, 4), b(9, 4);
  const auto wa = sample_weights(m, sigma, a);
  EXPECT_EQ(wa.theta, sample_weights(m, sigma, b).theta);
  EXPECT_DOUBLE_EQ(wa.theta[1], -2.0 + 0.3 * wa.eps[1]);
}

TEST(SampleWeights, StandardDeviationOfScalar) {
  const std::vector<double> m{0.0}, sigma{0.1};
  Rng rng(12);
  const std::size_t n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sample_weights(m, sigma, rng).theta[0];
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / n;
  const double sd = std::sqrt((s2 - n * mean * mean) / (n - 1));
  EXPECT_LT(std::abs(sd - 0.1) / 0.1, 0.01);
}

TEST(Estimators, ReparamExamples) {
  const double g[] = {2.0}, theta[] = {1.5}, m[] = {1.0}, sigma[] = {0.5};
  EXPECT_EQ(estimate_hessian_reparam(g, theta, m, sigma), (std::vector<double>{4.0}));
  const double at_mean[] = {1.0};
  EXPECT_EQ(estimate_hessian_reparam(g, at_mean, m, sigma), (std::vector<double>{0.0}));
}

TEST(Estimators, ReparamSteinOracleOnQuadratic) {
  // l = c/2 (theta - target)^2, so E[h_hat] = c exactly.
  const double c = 3.0, target = 0.7;
  const std::vector<double> m{0.2}, sigma{0.4};
  Rng rng(77);
  const std::size_t n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = sample_weights(m, sigma, rng);
    const double g[] = {c * (w.theta[0] - target)};
    const double h = estimate_hessian_reparam(g, w.theta, m, sigma)[0];
    s1 += h;
    s2 += h * h;
  }
  const double mean = s1 / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - c), 3.0 * se) << "mean " << mean << " se " << se;
}

TEST(Estimators, SquaredGradient) {
  const double g[] = {-3.0, 2.0};
  EXPECT_EQ(estimate_hessian_sq(g), (std::vector<double>{9.0, 4.0}));
  const double z[] = {0.0};
  EXPECT_EQ(estimate_hessian_sq(z), (std::vector<double>{0.0}));
}

TEST(Estimators, GaussNewton) {
  EXPECT_EQ(estimate_hessian_gn({{1.0}, {-1.0}}), (std::vector<double>{1.0}));
  EXPECT_EQ(estimate_hessian_gn({{-3.0, 2.0}}), estimate_hessian_sq(std::vector<double>{-3.0, 2.0}));
  EXPECT_THROW(estimate_hessian_gn({}), Error);
}

TEST(Estimators, GaussNewtonDominatesSquaredMeanGradient) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + rng.below(8), p = 1 + rng.below(5);
    std::vector<std::vector<double>> per(b);
    std::vector<double> mean(p, 0.0);
    for (auto& g : per) {
      g = rng.gaussian_vector(p);
      for (std::size_t k = 0; k < p; ++k) mean[k] += g[k] / static_cast<double>(b);
    }
    const auto gn = estimate_hessian_gn(per);
    const auto sq = estimate_hessian_sq(mean);
    for (std::size_t k = 0; k < p; ++k) {
      EXPECT_GE(gn[k], 0.0);
      EXPECT_GE(gn[k] * (1 + 1e-12) + 1e-300, sq[k]);
    }
  }
}

TEST(Accumulate, Weights) {
  const std::size_t equal[] = {10, 10};
  EXPECT_EQ(accumulation_weights(equal), (std::vector<double>{0.5, 0.5}));
  const std::size_t skewed[] = {64, 64, 192, 192};
  const auto w = accumulation_weights(skewed);
  EXPECT_EQ(w, (std::vector<double>{0.125, 0.125, 0.375, 0.375}));
  double sum = 0.0;
  for (double v : w) sum += v;
  EXPECT_EQ(sum, 1.0);
}

TEST(Accumulate, OrderedSumIsExactlyOne) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t j = 1 + rng.below(9), s = 1 + rng.below(4);
    std::vector<std::size_t> sizes;
    for (std::size_t d = 0; d < j; ++d) {
      const std::size_t b = 1 + rng.below(1000);
      for (std::size_t k = 0; k < s; ++k) sizes.push_back(b);
    }
    double sum = 0.0;
    for (double v : accumulation_weights(sizes)) sum += v;
    ASSERT_EQ(sum, 1.0);
  }
}

TEST(Accumulate, SingletonPassesThrough) {
  GradHessSample s;
  s.g_hat = {0.3, -1.7};
  s.h_hat = {2.5, 0.01};
  s.batch_size = 7;
  s.loss = 0.42;
  const auto acc = accumulate({s}, 1);
  EXPECT_EQ(acc.g_hat, s.g_hat);
  EXPECT_EQ(acc.h_hat, s.h_hat);
  EXPECT_EQ(acc.loss, 0.42);
}

TEST(Accumulate, EqualBatchesAverage) {
  GradHessSample a, b;
  a.g_hat = {1.0};
  a.h_hat = {4.0};
  a.batch_size = 8;
  b.g_hat = {3.0};
  b.h_hat = {2.0};
  b.batch_size = 8;
  b.device = 1;
  const auto acc = accumulate({b, a}, 1);
  EXPECT_EQ(acc.g_hat, (std::vector<double>{2.0}));
  EXPECT_EQ(acc.h_hat, (std::vector<double>{3.0}));
}

TEST(Accumulate, RejectsRaggedDevices) {
  GradHessSample a;
  a.g_hat = a.h_hat = {1.0};
  EXPECT_THROW(accumulate({a}, 2), Error);
}

TEST(IvonStep, FirstStepBiasCorrection) {
  IvonConfig c;
  c.beta1 = 0.9;
  c.lambda = 1.0;
  auto s = ivon_init(flat({0.0}), c);
  const double g[] = {1.0}, h[] = {c.h0};
  const auto d = ivon_step(s, g, h, 0.0, c);
  EXPECT_DOUBLE_EQ(s.g[0], 0.1);
  // With m = prior, the direction times (h + delta) is g_bar.
  EXPECT_NEAR(d[0] * (s.h[0] + c.delta), 1.0, 1e-14);
  EXPECT_EQ(s.t, 1);
}

TEST(IvonStep, HessianUpdateValue) {
  EXPECT_NEAR(ivon_h_update(0.5, 0.7, 0.999, 0.1), 0.50020003333, 1e-10);
  const double h = ivon_h_update(0.1, -1000.0, 1.0 - 1e-5, 0.1);
  EXPECT_NEAR(h + 0.1, 0.190249, 1e-6);
  EXPECT_GE(h + 0.1, 0.1);
}

TEST(IvonStep, MeanUpdateValue) {
  IvonConfig c;
  c.beta1 = 0.0;
  c.beta2 = 0.999;
  c.delta = 0.1;
  c.h0 = 0.5;
  c.lambda = 1.0;
  auto s = ivon_init(flat({1.0}), c);
  const double g[] = {0.2}, h[] = {0.5};
  ivon_step(s, g, h, 0.1, c);
  EXPECT_NEAR(s.h[0], 0.5, 1e-15);
  EXPECT_NEAR(s.m.values()[0], 0.95, 1e-14);
}

TEST(IvonStep, StationaryAtRegularizedMinimum) {
  // At m = H target / (H + delta) with the exact gradient, the direction vanishes.
  const double H = 2.0, target = 1.0;
  IvonConfig c = quad_cfg();
  const double m_star = H * target / (H + c.delta);
  auto s = ivon_init(flat({m_star}), c);
  s.t = 100000;
  s.h[0] = H;
  s.g[0] = H * (m_star - target);
  const double g[] = {H * (m_star - target)}, h[] = {H};
  for (int i = 0; i < 50; ++i) ivon_step(s, g, h, 0.1, c);
  EXPECT_NEAR(s.m.values()[0], m_star, 1e-12);
  EXPECT_NEAR(s.sigma[0], 1.0 / std::sqrt(10.0 * (H + c.delta)), 1e-12);
}

TEST(IvonStep, ClippingModes) {
  IvonConfig c;
  c.beta1 = 0.0;
  c.delta = 1.0;
  c.h0 = 1.0;
  c.lambda = 1.0;
  c.beta2 = 0.5;
  c.xi = 0.5;
  const double g[] = {10.0}, h[] = {1.0};
  auto full = ivon_init(flat({4.0}), c);
  EXPECT_DOUBLE_EQ(ivon_step(full, g, h, 1.0, c)[0], 0.5);
  c.clip_mode = ClipMode::before_decay;
  auto before = ivon_init(flat({4.0}), c);
  // clip(10 / 2) + 1 * 4 / 2
  EXPECT_DOUBLE_EQ(ivon_step(before, g, h, 1.0, c)[0], 2.5);
}

TEST(IvonStep, NonFiniteRejectedWithoutSideEffects) {
  IvonConfig c;
  c.lambda = 1.0;
  auto s = ivon_init(flat({1.0, 2.0}), c);
  const auto before = s.m;
  const double g[] = {0.0, std::nan("")}, h[] = {1.0, 1.0};
  try {
    ivon_step(s, g, h, 0.1, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numerical);
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
  EXPECT_EQ(s.m, before);
  EXPECT_EQ(s.t, 0);
  const double hi[] = {1.0, INFINITY}, ok[] = {0.0, 0.0};
  EXPECT_THROW(ivon_step(s, ok, hi, 0.1, c), Error);
}

TEST(Sgd, ZeroGradientIsAFixedPoint) {
  std::vector<double> p{1.0, -2.0}, vel(2, 0.0);
  const double g[] = {0.0, 0.0};
  sgd_step(p, g, 0.1, 0.9, 0.0, vel);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Sgd, ConvergesToRegularizedMinimum) {
  const double H = 2.0, target = 1.0, wd = 0.5;
  std::vector<double> p{0.0}, vel{0.0};
  for (int i = 0; i < 10000; ++i) {
    const double g[] = {H * (p[0] - target)};
    sgd_step(p, g, 0.01, 0.9, wd, vel);
  }
  EXPECT_NEAR(p[0], target * H / (H + wd), 1e-6);
}

TEST(Adamw, FirstStepIsSignTimesLr) {
  AdamwState s({1.0, 1.0, 1.0});
  const double g[] = {0.3, -20.0, 1e-3};
  adamw_step(s, g, 0.01, 0.9, 0.999, 1e-8, 0.0);
  EXPECT_NEAR(s.params[0], 0.99, 1e-9);
  EXPECT_NEAR(s.params[1], 1.01, 1e-9);
  EXPECT_NEAR(s.params[2], 0.99, 1e-7);
  EXPECT_EQ(s.t, 1);
}

TEST(Adamw, ZeroGradientDecaysAtLrTimesWd) {
  AdamwState s({2.0});
  const double g[] = {0.0};
  adamw_step(s, g, 0.1, 0.9, 0.999, 1e-8, 0.5);
  EXPECT_DOUBLE_EQ(s.params[0], 2.0 * (1.0 - 0.05));
  adamw_step(s, g, 0.1, 0.9, 0.999, 1e-8, 0.5);
  EXPECT_DOUBLE_EQ(s.params[0], 2.0 * 0.95 * 0.95);
}

TEST(Adamw, DebiasedSecondMoment) {
  AdamwState s({0.0});
  const double g[] = {2.0};
  adamw_step(s, g, 0.0, 0.9, 0.99, 1e-8, 0.0);
  EXPECT_NEAR(s.v[0], 0.04, 1e-15);
  EXPECT_NEAR(s.second_moment_debiased(0.99)[0], 4.0, 1e-12);
}

TEST(Schedule, WarmupCosine) {
  Schedule s;
  s.kind = ScheduleKind::warmup_cosine;
  s.warmup_steps = 10;
  s.total_steps = 110;
  EXPECT_EQ(schedule_lr(s, 0.5, 0), 0.0);
  EXPECT_DOUBLE_EQ(schedule_lr(s, 0.5, 5), 0.25);
  EXPECT_DOUBLE_EQ(schedule_lr(s, 0.5, 10), 0.5);
  EXPECT_NEAR(schedule_lr(s, 0.5, 60), 0.25, 1e-15);
  EXPECT_NEAR(schedule_lr(s, 0.5, 110), 0.0, 1e-17);
  s.floor = 0.1;
  EXPECT_NEAR(schedule_lr(s, 0.5, 110), 0.05, 1e-15);
  EXPECT_THROW(schedule_lr(s, 0.5, 111), Error);
  Schedule c;
  c.total_steps = 3;
  EXPECT_EQ(schedule_lr(c, 0.3, 2), 0.3);
}

OptimizerConfig ivon_opt(const IvonConfig& ivon, double lr) {
  OptimizerConfig c;
  c.kind = OptimizerKind::ivon;
  c.ivon = ivon;
  c.ivon.alpha0 = lr;
  return c;
}

TEST(TrainLoop, ZeroEpochsLeavesInit) {
  const auto spec = testing::mlp({2, 4, 2});
  const auto loss = testing::crossentropy();
  const auto ds = data::gen_two_moons(20, 0.1, 3);
  Rng rng(0);
  const auto init = models::init_params(spec, loss, rng);
  IvonConfig ic;
  TrainOptions opts;
  opts.epochs = 0;
  const auto r = train_loop(spec, loss, ds, ivon_opt(ic, 0.1), opts, init, Rng(1));
  EXPECT_TRUE(r.trace.empty());
  const auto ref = ivon_init(init, ic, 20.0);
  EXPECT_EQ(r.state.ivon.m, ref.m);
  EXPECT_EQ(r.state.ivon.h, ref.h);
  EXPECT_EQ(r.state.ivon.sigma, ref.sigma);
}

TEST(TrainLoop, DeterministicAndThreadIndependent) {
  const auto spec = testing::mlp({2, 8, 2});
  const auto loss = testing::crossentropy();
  const auto ds = data::gen_two_moons(64, 0.2, 4);
  Rng rng(2);
  const auto init = models::init_params(spec, loss, rng);
  IvonConfig ic;
  ic.mc_samples = 3;
  TrainOptions opts;
  opts.epochs = 3;
  opts.batch_size = 16;
  opts.devices = 2;
  std::size_t epochs_seen = 0;
  opts.on_epoch_end = [&](std::size_t e, const TrainState&) { epochs_seen = e; };
  const auto a = train_loop(spec, loss, ds, ivon_opt(ic, 0.05), opts, init, Rng(7));
  EXPECT_EQ(epochs_seen, 3u);
  opts.threads = 4;
  const auto b = train_loop(spec, loss, ds, ivon_opt(ic, 0.05), opts, init, Rng(7));
  ASSERT_EQ(a.trace.size(), 12u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
    EXPECT_EQ(a.trace[i].max_h, b.trace[i].max_h);
  }
  EXPECT_EQ(a.state.ivon.m, b.state.ivon.m);
  EXPECT_EQ(a.state.ivon.h, b.state.ivon.h);
  const auto c = train_loop(spec, loss, ds, ivon_opt(ic, 0.05), opts, init, Rng(8));
  EXPECT_NE(a.state.ivon.m, c.state.ivon.m);
}

TEST(TrainLoop, QuadraticFixedPoint) {
  const auto loss = testing::quadratic({2.0}, {1.0});
  const auto spec = testing::mlp({1, 1}, models::Activation::relu, models::OutputKind::scalar);
  const auto ds = data::gen_constant(1);
  Rng r0(0);
  const auto init = models::init_params(spec, loss, r0);
  TrainOptions opts;
  opts.epochs = 20000;
  opts.batch_size = 1;
  const auto r = train_loop(spec, loss, ds, ivon_opt(quad_cfg(), 0.001), opts, init, Rng(3));
  EXPECT_LT(std::abs(r.state.ivon.m.values()[0] - 0.8) / 0.8, 0.01);
  EXPECT_LT(std::abs(r.state.ivon.sigma[0] - 0.2) / 0.2, 0.01);
}

TEST(TrainLoop, SgdDivergenceReportsStep) {
  const auto loss = testing::quadratic({2.0}, {1.0});
  const auto spec = testing::mlp({1, 1}, models::Activation::relu, models::OutputKind::scalar);
  const auto ds = data::gen_constant(1);
  OptimizerConfig c;
  c.kind = OptimizerKind::sgd;
  c.sgd.lr = 10.0;
  c.sgd.momentum = 0.0;
  // Independent replay of the iteration p <- p - lr H (p - target).
  std::int64_t expected = -1;
  double p = 0.0;
  for (std::int64_t step = 0; step < 1000; ++step) {
    if (!std::isfinite((p - 1.0) * (p - 1.0))) {
      expected = step;
      break;
    }
    p -= 10.0 * 2.0 * (p - 1.0);
    if (!std::isfinite(p)) {
      expected = step;
      break;
    }
  }
  ASSERT_GT(expected, 0);
  TrainOptions opts;
  opts.epochs = 1000;
  opts.batch_size = 1;
  try {
    train_loop(spec, loss, ds, c, opts, flat({0.0}), Rng(0));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), expected);
    EXPECT_NE(std::string(e.what()).find(std::to_string(expected)), std::string::npos);
  }
}

TEST(TrainLoop, IvonDivergenceIsReported) {
  const auto spec = testing::mlp({1, 1}, models::Activation::relu, models::OutputKind::scalar);
  models::LossSpec loss;
  loss.kind = models::LossKind::mse;
  data::Dataset ds;
  ds.x = Tensor::matrix(2, 1, {1e200, -1e200});
  ds.targets = {0.0, 0.0};
  ds.label_kind = data::LabelKind::scalar;
  TrainOptions opts;
  opts.epochs = 3;
  opts.batch_size = 2;
  try {
    train_loop(spec, loss, ds, ivon_opt(IvonConfig{}, 0.1), opts,
               models::ParamVector(models::make_manifest(spec, loss), {1.0, 0.0}), Rng(0));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_EQ(e.code(), ErrorCode::divergence);
  }
}

TEST(TrainLoop, ShardSizes) {
  EXPECT_EQ(shard_sizes(10, 3), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(shard_sizes(2, 4), (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(shard_sizes(8, 1), (std::vector<std::size_t>{8}));
}

}  // namespace
}  // namespace vonlab::vopt
