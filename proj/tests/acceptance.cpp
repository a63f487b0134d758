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

// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vonlab/analysis.hpp"
#include "vonlab/data.hpp"
#include "vonlab/error.hpp"
#include "vonlab/experiment.hpp"
#include "vonlab/ivon.hpp"
#include "vonlab/plot.hpp"
#include "vonlab/tape.hpp"
#include "vonlab/train.hpp"

namespace {

using namespace vonlab;
namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

models::ParamVector flat(std::vector<double> v) {
  const std::size_t n = v.size();
  return models::ParamVector({{"w", {n}, 0}}, std::move(v));
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = testing::read_file(e.path());
  return files;
}

void run(const std::string& cmd, const fs::path& config, std::optional<fs::path> out = {},
         std::optional<std::uint64_t> seed = {}) {
  cli::RunOptions o;
  o.config = config;
  o.out_dir = std::move(out);
  o.seed = seed;
  cli::run_command(cmd, o);
}

// Mirrors configs/mc_averaging.json (configs/loo_train.json sets 12 epochs).
json mc_averaging_config() {
  return json::parse(R"({
    "schema_version": 1,
    "model": {"kind": "mlp", "layer_widths": [2, 64, 64, 2], "activation": "relu", "output": "softmax"},
    "loss": {"kind": "crossentropy"},
    "optimizer": {"kind": "ivon", "lr": 0.1, "beta1": 0.9, "beta2": 0.9999, "delta": 0.0001, "h0": 0.1,
                  "mc_samples": 1, "schedule": {"kind": "warmup_cosine", "warmup_steps": 20}},
    "data": {"generator": "two_moons", "params": {"n": 400, "noise": 0.3}, "seed": 100,
             "test_fraction": 0.5, "standardize": true},
    "epochs": 300,
    "batch_size": 32,
    "seed": 0,
    "eval": {"mc_samples": [1, 8, 64], "ece_bins": 15},
    "output_dir": "mc_averaging"
  })");
}

json blobs_data() {
  return json::parse(R"({
    "generator": "blobs",
    "params": {"k": 3, "n": 600, "spread": 1.0, "dim": 3,
               "centers": [[0, 4, 0], [-3.5, -2, 0], [3.5, -2, 0]]},
    "seed": 50,
    "test_fraction": 0.5,
    "standardize": true
  })");
}

// Mirrors configs/ood_blobs_train.json and configs/ood_blobs.json.
json ood_train_config() {
  json c = json::parse(R"({
    "schema_version": 1,
    "model": {"kind": "mlp", "layer_widths": [3, 32, 32, 3], "activation": "relu", "output": "softmax"},
    "loss": {"kind": "crossentropy"},
    "optimizer": {"kind": "ivon", "lr": 0.1, "beta2": 0.9999, "delta": 0.01, "h0": 0.1,
                  "schedule": {"kind": "warmup_cosine", "warmup_steps": 20}},
    "epochs": 100,
    "batch_size": 32,
    "seed": 0,
    "eval": {"mc_samples": [64]},
    "output_dir": "ood_train"
  })");
  c["data"] = blobs_data();
  return c;
}

json ood_config() {
  json c = {{"schema_version", 1},
            {"checkpoint", "ood_train/checkpoint"},
            {"data", blobs_data()},
            {"ood", {{"offset", {0.0, 0.0, 20.0}}}},
            {"mc_samples", 64},
            {"seed", 0},
            {"output_dir", "ood"}};
  c["data"].erase("standardize");
  return c;
}

// ---------------------------------------------------------------------------

Outcome positivity_fuzz() {
  Rng rng(20240101);
  const std::size_t n = 1000000;
  std::size_t bad = 0;
  double worst = INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = std::pow(10.0, uniform(rng, -6.0, 0.0));
    const double a0 = std::pow(10.0, uniform(rng, -6.0, 6.0));
    const double h = a0 - delta;
    const double h_hat = uniform(rng, -1e6, 1e6);
    const double beta2 = 1.0 - std::pow(10.0, uniform(rng, -7.0, -1.0));
    const double prev = h + delta;
    if (!(prev > 0.0)) continue;
    const double post = vopt::ivon_h_update(h, h_hat, beta2, delta) + delta;
    if (!(post > 0.0) || !(post >= 0.5 * prev)) ++bad;
    worst = std::min(worst, post / prev);
  }
  // The same property through full steps of the optimizer.
  vopt::IvonConfig cfg;
  cfg.delta = 1e-3;
  cfg.h0 = 1e-3;
  cfg.lambda = 1.0;
  cfg.beta2 = 0.9;
  auto st = vopt::ivon_init(flat(std::vector<double>(64, 0.0)), cfg);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> g(64), hh(64);
    for (std::size_t k = 0; k < 64; ++k) {
      g[k] = uniform(rng, -1.0, 1.0);
      hh[k] = uniform(rng, -1e6, 1e6);
    }
    const auto before = st.h;
    vopt::ivon_step(st, g, hh, 1e-3, cfg);
    for (std::size_t k = 0; k < 64; ++k)
      if (!(st.h[k] + cfg.delta > 0.0) || !(st.h[k] + cfg.delta >= 0.5 * (before[k] + cfg.delta))) ++bad;
  }
  return {bad == 0, "draws=" + std::to_string(n) + " violations=" + std::to_string(bad) +
                        " min ratio=" + num(worst)};
}

Outcome stein_oracle() {
  const std::size_t d = 10, n = 100000;
  Rng rng(7);
  std::vector<double> H(d), target(d), m(d), sigma(d);
  for (std::size_t i = 0; i < d; ++i) {
    H[i] = uniform(rng, 0.1, 10.0);
    target[i] = uniform(rng, -1.0, 1.0);
    m[i] = uniform(rng, -1.0, 1.0);
    sigma[i] = uniform(rng, 0.05, 1.0);
  }
  const auto spec = testing::mlp({1, 1}, models::Activation::relu, models::OutputKind::scalar);
  const auto loss = testing::quadratic(H, target);
  const auto manifest = models::make_manifest(spec, loss);
  const auto batch = data::gen_constant(1).as_batch();
  std::vector<double> s1(d, 0.0), s2(d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto w = vopt::sample_weights(m, sigma, rng);
    const auto g = models::loss_and_grad(spec, loss, w.theta, manifest, batch).grad;
    const auto h = vopt::estimate_hessian_reparam(g, w.theta, m, sigma);
    for (std::size_t i = 0; i < d; ++i) {
      s1[i] += h[i];
      s2[i] += h[i] * h[i];
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = s1[i] / n;
    const double se = std::sqrt((s2[i] / n - mean * mean) / n);
    worst = std::max(worst, std::abs(mean - H[i]) / se);
  }
  return {worst <= 3.0, "max |mean - H| / SE = " + num(worst)};
}

// Minimizes f on [lo, hi] by golden-section search.
double golden(const std::function<double(double)>& f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi, c = b - r * (b - a), e = a + r * (b - a);
  double fc = f(c), fe = f(e);
  for (int it = 0; it < 200; ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + r * (b - a);
      fe = f(e);
    }
  }
  return 0.5 * (a + b);
}

Outcome variational_fixed_point() {
  const double H = 2.0, target = 1.0, delta = 0.5, lambda = 10.0;
  // E_q[l] + KL(q || N(0, 1/(lambda delta))) / lambda, constants dropped.
  auto elbo = [&](double m, double s) {
    return 0.5 * H * ((m - target) * (m - target) + s * s) + 0.5 * delta * (m * m + s * s) - std::log(s) / lambda;
  };
  double om = 0.0, os = 1.0;
  for (int round = 0; round < 20; ++round) {
    om = golden([&](double m) { return elbo(m, os); }, -10.0, 10.0);
    os = golden([&](double s) { return elbo(om, s); }, 1e-6, 10.0);
  }

  vopt::OptimizerConfig cfg;
  cfg.ivon.alpha0 = 0.001;
  cfg.ivon.beta1 = 0.9;
  cfg.ivon.beta2 = 0.9995;
  cfg.ivon.delta = delta;
  cfg.ivon.h0 = 1.0;
  cfg.ivon.lambda = lambda;
  cfg.ivon.mc_samples = 4;
  const auto spec = testing::mlp({1, 1}, models::Activation::relu, models::OutputKind::scalar);
  const auto loss = testing::quadratic({H}, {target});
  Rng r0(0);
  const auto init = models::init_params(spec, loss, r0);
  vopt::TrainOptions opts;
  opts.epochs = 20000;
  opts.batch_size = 1;
  const auto res = vopt::train_loop(spec, loss, data::gen_constant(1), cfg, opts, init, Rng(0).split(2));
  const double m = res.state.ivon.m.values()[0], s = res.state.ivon.sigma[0];
  const bool oracle_ok = std::abs(om - 0.8) < 1e-6 && std::abs(os - 0.2) < 1e-6;
  const bool ok = oracle_ok && std::abs(m - om) / om <= 0.01 && std::abs(s - os) / os <= 0.02;
  return {ok, "oracle m=" + num(om, 9) + " sigma=" + num(os, 9) + "; ivon m=" + num(m) + " sigma=" + num(s)};
}

Outcome gradient_correctness() {
  Rng rng(4242);
  double worst = 0.0;
  std::size_t max_params = 0;
  for (int net = 0; net < 25; ++net) {
    std::vector<std::size_t> widths{1 + rng.below(5)};
    const std::size_t hidden = 1 + rng.below(3);
    for (std::size_t l = 0; l < hidden; ++l) widths.push_back(1 + rng.below(16));
    const bool classify = rng.below(2) == 0;
    widths.push_back(classify ? 2 + rng.below(3) : 1);
    const auto act = rng.below(2) == 0 ? models::Activation::tanh : models::Activation::relu;
    const auto spec = testing::mlp(widths, act, classify ? models::OutputKind::softmax : models::OutputKind::scalar);
    models::LossSpec loss;
    if (!classify) loss.kind = models::LossKind::mse;
    auto params = models::init_params(spec, loss, rng);
    // Generic point: zero biases put pre-activations exactly on the relu kink.
    for (double& p : params.values()) p += 0.5 * rng.gaussian();
    if (params.size() > 1000) {
      --net;
      continue;
    }
    max_params = std::max(max_params, params.size());
    const std::size_t b = 1 + rng.below(6);
    models::Batch batch;
    batch.x = Tensor::matrix(b, widths.front(), rng.gaussian_vector(b * widths.front()));
    for (std::size_t i = 0; i < b; ++i) {
      if (classify) batch.labels.push_back(static_cast<int>(rng.below(widths.back())));
      else batch.targets.push_back(rng.gaussian());
    }
    const auto lg = models::loss_and_grad(spec, loss, params.values(), params.manifest(), batch);
    const auto fd = finite_diff_grad(
        [&](std::span<const double> p) { return models::forward_loss(spec, loss, p, params.manifest(), batch).value; },
        params.values(), 1e-5);
    worst = std::max(worst, testing::max_rel_err(lg.grad, fd));
  }
  return {worst <= 1e-5, "25 nets, max params=" + std::to_string(max_params) + ", max rel err=" + num(worst)};
}

Outcome accumulation_equivalence() {
  const std::size_t J = 2, S = 2, B = 16;
  const auto spec = testing::mlp({2, 8, 2}, models::Activation::tanh);
  const auto loss = testing::crossentropy();
  const auto ds = data::gen_two_moons(64, 0.2, 13);
  Rng init_rng(3);
  const auto init = models::init_params(spec, loss, init_rng);
  vopt::OptimizerConfig cfg;
  cfg.ivon.alpha0 = 0.05;
  cfg.ivon.mc_samples = S;
  vopt::TrainOptions opts;
  opts.epochs = 25;
  opts.batch_size = B;
  opts.devices = J;
  opts.threads = 3;
  const Rng run_rng(99);
  const auto dist = vopt::train_loop(spec, loss, ds, cfg, opts, init, run_rng);

  // Sequential replay: one process walks the same (device, sample) pairs.
  const std::size_t P = init.size();
  vopt::IvonState st = vopt::ivon_init(init, cfg.ivon, static_cast<double>(ds.size()));
  const Rng noise = vopt::training_noise_stream(run_rng);
  const Rng order = vopt::batch_stream(run_rng);
  const models::Batch full = ds.as_batch();
  const double w = 1.0 / static_cast<double>(J * S);
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& rows : data::batches(ds, B, order.at(epoch).next_u64())) {
      const models::Batch batch = models::slice(full, rows);
      std::vector<double> g(P, 0.0), h(P, 0.0);
      for (std::size_t j = 0; j < J; ++j) {
        std::vector<std::size_t> idx(B / J);
        std::iota(idx.begin(), idx.end(), j * (B / J));
        const models::Batch shard = models::slice(batch, idx);
        for (std::size_t s = 0; s < S; ++s) {
          Rng r = noise.at(step, (j * S + s) * P);
          const auto ws = vopt::sample_weights(st, r);
          const auto pass = models::forward_loss(spec, loss, ws.theta, init.manifest(), shard);
          const auto gk = models::flat_grad(pass);
          const auto hk = vopt::estimate_hessian_reparam(gk, ws.theta, st.m.values(), st.sigma);
          for (std::size_t i = 0; i < P; ++i) {
            g[i] += w * gk[i];
            h[i] += w * hk[i];
          }
        }
      }
      vopt::ivon_step(st, g, h, cfg.ivon.alpha0, cfg.ivon);
      ++step;
    }
  }
  const auto& d = dist.state.ivon;
  const bool same = d.t == 100 && st.t == 100 && d.m == st.m && d.h == st.h && d.g == st.g && d.sigma == st.sigma;

  // Arbitrary batch sizes: the ordered weight sum is exactly one.
  Rng rng(5);
  std::size_t inexact = 0;
  double max_dev = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t devices = 1 + rng.below(16), samples = 1 + rng.below(8);
    std::vector<std::size_t> sizes;
    std::vector<vopt::GradHessSample> acc;
    std::uint64_t total = 0;
    for (std::size_t j = 0; j < devices; ++j) {
      const std::size_t bj = 1 + rng.below(1000);
      for (std::size_t s = 0; s < samples; ++s) {
        sizes.push_back(bj);
        acc.push_back({{1.0}, {1.0}, bj, j, s, 0.0});
        total += bj;
      }
    }
    const auto alpha = vopt::accumulation_weights(sizes);
    double sum = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      sum += alpha[k];
      max_dev = std::max(max_dev, std::abs(alpha[k] - static_cast<double>(sizes[k]) / static_cast<double>(total)));
    }
    if (sum != 1.0 || vopt::accumulate(acc, samples).g_hat[0] != 1.0) ++inexact;
  }
  return {same && inexact == 0 && max_dev < 1e-14,
          std::string("J=2 S=2 100 steps ") + (same ? "bit-identical" : "DIFFER") + "; weight sums inexact in " +
              std::to_string(inexact) + "/10000, max |alpha - B/sum B|=" + num(max_dev)};
}

Outcome mc_averaging() {
  TempDir dir("acc_mc");
  testing::write_json(dir / "mc.json", mc_averaging_config());
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const fs::path out = dir / ("seed" + std::to_string(seed));
    run("train", dir / "mc.json", out, seed);
    double mean = NAN, s64 = NAN;
    for (const auto& row : testing::read_jsonl(out / "metrics.jsonl")) {
      if (row["eval"] == "mean") mean = row["nll"].get<double>();
      if (row["S"] == 64) s64 = row["nll"].get<double>();
    }
    wins += s64 <= mean;
    detail += " " + num(s64, 4) + "/" + num(mean, 4);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds, NLL S=64/mean:" + detail};
}

Outcome merging() {
  Rng rng(17);
  const std::size_t P = 50;
  auto random_vec = [&](double lo, double hi) {
    std::vector<double> v(P);
    for (auto& x : v) x = uniform(rng, lo, hi);
    return v;
  };
  analysis::MergeInput one{flat(random_vec(-2, 2)), random_vec(0, 3), {{flat(random_vec(-2, 2)), random_vec(0, 3)}}};
  const bool exact = analysis::merge_models(one) == one.tasks[0].theta;

  analysis::MergeInput toy{flat({0.0}), {1.0}, {{flat({1.0}), {1.0}}, {flat({2.0}), {1.0}}}};
  const double toy_value = analysis::merge_models(toy).values()[0];

  analysis::MergeInput many{flat(random_vec(-2, 2)), random_vec(0, 3), {}};
  for (int t = 0; t < 5; ++t) many.tasks.push_back({flat(random_vec(-2, 2)), random_vec(0, 3)});
  const auto ref = analysis::merge_models(many);
  std::vector<std::size_t> perm(5);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t orders = 0, mismatched = 0;
  do {
    analysis::MergeInput p{many.theta0, many.h0, {}};
    for (auto k : perm) p.tasks.push_back(many.tasks[k]);
    mismatched += !(analysis::merge_models(p) == ref);
    ++orders;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {exact && toy_value == 2.0 && mismatched == 0,
          std::string("T=1 ") + (exact ? "bit-exact" : "DIFFERS") + ", toy=" + num(toy_value, 17) + ", " +
              std::to_string(mismatched) + "/" + std::to_string(orders) + " orders differ"};
}

Outcome loo_faithfulness() {
  TempDir dir("acc_loo");
  json train = mc_averaging_config();
  train["epochs"] = 12;
  train["checkpoint_every_epoch"] = true;
  train["output_dir"] = "loo_train";
  testing::write_json(dir / "train.json", train);
  run("train", dir / "train.json");
  std::vector<std::string> cks;
  for (int e = 1; e <= 12; ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04d", e);
    cks.push_back(std::string("loo_train/checkpoints/") + name);
  }
  json sens = {{"schema_version", 1},
               {"checkpoint", "loo_train/checkpoint"},
               {"checkpoints", cks},
               {"data", train["data"]},
               {"output_dir", "loo"}};
  testing::write_json(dir / "sens.json", sens);
  run("sensitivity", dir / "sens.json");
  const json summary = json::parse(testing::read_file(dir / "loo" / "loo_summary.json"));
  const double r = summary["pearson_loo_test"].is_number() ? summary["pearson_loo_test"].get<double>() : NAN;

  sens["sigma2_scale"] = 0.0;
  sens["output_dir"] = "loo_zero";
  testing::write_json(dir / "zero.json", sens);
  run("sensitivity", dir / "zero.json");
  const auto table = plot::read_table(dir / "loo_zero" / "loo.csv");
  const auto loo = table.column("loo"), tl = table.column("train_loss");
  double gap = 0.0;
  for (std::size_t i = 0; i < loo.size(); ++i) gap = std::max(gap, std::abs(loo[i] - tl[i]));
  return {r >= 0.8 && loo.size() == 12 && gap <= 1e-12,
          std::to_string(summary["checkpoints"].get<int>()) + " checkpoints, pearson=" + num(r, 4) +
              ", sigma2=0 max |loo - train|=" + num(gap)};
}

Outcome metric_oracles() {
  Rng rng(3);
  std::vector<std::string> failures;
  auto brute = [](const std::vector<double>& in, const std::vector<double>& out) {
    double c = 0.0;
    for (double a : in)
      for (double b : out) c += b > a ? 1.0 : (b == a ? 0.5 : 0.0);
    return c / static_cast<double>(in.size() * out.size());
  };
  double auroc_gap = 0.0;
  for (int variant = 0; variant < 2; ++variant) {
    std::vector<double> in(500), out(500);
    for (auto& v : in) v = rng.uniform();
    for (auto& v : out) v = 0.3 + rng.uniform();
    if (variant == 1) {
      for (auto& v : in) v = std::round(v * 20.0) / 20.0;
      for (auto& v : out) v = std::round(v * 20.0) / 20.0;
    }
    auroc_gap = std::max(auroc_gap, std::abs(analysis::auroc(in, out) - brute(in, out)));
  }
  if (auroc_gap > 1e-12) failures.push_back("auroc");

  // Bin-by-bin calibrated: in the bin centered at c, a fraction c is correct.
  std::vector<double> probs;
  std::vector<int> labels;
  for (int b = 5; b < 10; ++b) {
    const double c = (b + 0.5) / 10.0;
    const int correct = static_cast<int>(std::lround(c * 20.0));
    for (int i = 0; i < 20; ++i) {
      probs.push_back(c);
      probs.push_back(1.0 - c);
      labels.push_back(i < correct ? 0 : 1);
    }
  }
  const double ece = analysis::expected_calibration_error(Tensor::matrix(labels.size(), 2, probs), labels, 10);
  if (ece > 1e-12) failures.push_back("calibrated ece");

  const int zero[] = {0};
  const auto perfect = analysis::compute_metrics(Tensor::matrix(1, 2, {1.0, 0.0}), zero, 1, 15);
  if (perfect.accuracy != 1.0 || perfect.nll != 0.0 || perfect.ece != 0.0 || perfect.brier != 0.0)
    failures.push_back("perfect");
  const auto conf = analysis::compute_metrics(Tensor::matrix(1, 2, {0.8, 0.2}), zero, 1, 15);
  if (std::abs(conf.ece - 0.2) > 1e-12 || std::abs(conf.brier - 0.08) > 1e-12) failures.push_back("confidence 0.8");
  const auto unif = analysis::compute_metrics(Tensor::matrix(1, 2, {0.5, 0.5}), zero, 1, 15);
  if (std::abs(unif.brier - 0.5) > 1e-15 || std::abs(unif.nll - std::log(2.0)) > 1e-15) failures.push_back("uniform");

  const auto sep = analysis::compute_ood_metrics(std::vector<double>{0, 0}, std::vector<double>{1, 1});
  if (sep.auroc != 1.0 || sep.fpr_at_95tpr != 0.0) failures.push_back("separated ood");
  const auto pairs = analysis::compute_ood_metrics(std::vector<double>{0.1, 0.4}, std::vector<double>{0.2, 0.9});
  if (pairs.auroc != 0.75) failures.push_back("four-pair ood");

  std::string detail = "auroc gap=" + num(auroc_gap) + ", calibrated ece=" + num(ece);
  for (const auto& f : failures) detail += ", failed: " + f;
  return {failures.empty(), detail};
}

Outcome ood_separation() {
  TempDir dir("acc_ood");
  double worst = INFINITY;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const fs::path work = dir / ("seed" + std::to_string(seed));
    fs::create_directories(work);
    json train = ood_train_config();
    train["seed"] = seed;
    testing::write_json(work / "train.json", train);
    testing::write_json(work / "ood.json", ood_config());
    run("train", work / "train.json");
    run("ood", work / "ood.json");
    const double a = testing::read_jsonl(work / "ood" / "ood.jsonl").at(0)["auroc"].get<double>();
    worst = std::min(worst, a);
    detail += " " + num(a, 4);
  }
  return {worst >= 0.95, "AUROC per seed:" + detail};
}

Outcome determinism() {
  TempDir dir("acc_det");
  json data = {{"generator", "two_moons"},
               {"params", {{"n", 120}, {"noise", 0.2}}},
               {"seed", 3},
               {"test_fraction", 0.25},
               {"standardize", true}};
  json train = {{"schema_version", 1},
                {"model", {{"kind", "mlp"}, {"layer_widths", {2, 8, 2}}, {"activation", "tanh"}}},
                {"loss", {{"kind", "crossentropy"}}},
                {"optimizer", {{"kind", "ivon"}, {"lr", 0.1}, {"beta2", 0.9999}, {"h0", 0.1}, {"mc_samples", 2}}},
                {"devices", 2},
                {"data", data},
                {"epochs", 3},
                {"batch_size", 16},
                {"seed", 5},
                {"eval", {{"mc_samples", {1, 4}}}},
                {"checkpoint_every_epoch", true},
                {"output_dir", "run"}};
  testing::write_json(dir / "train.json", train);
  run("train", dir / "train.json");

  json blobs_train = train;
  blobs_train["model"]["layer_widths"] = {2, 8, 3};
  blobs_train["data"] = {{"generator", "blobs"},
                         {"params", {{"k", 3}, {"n", 150}, {"spread", 0.5}}},
                         {"seed", 2},
                         {"test_fraction", 0.3}};
  blobs_train["output_dir"] = "blobs_run";
  testing::write_json(dir / "blobs_train.json", blobs_train);
  run("train", dir / "blobs_train.json");

  json quad = {{"schema_version", 1},
               {"loss", {{"kind", "quadratic_oracle"}, {"h_diag", {2.0, 0.5}}, {"target", {1.0, -1.0}}}},
               {"optimizer", {{"kind", "ivon"}, {"lr", 0.01}, {"delta", 0.5}, {"h0", 1.0}, {"lambda", 10}, {"mc_samples", 4}}},
               {"data", {{"generator", "constant"}}},
               {"epochs", 300},
               {"batch_size", 1},
               {"seed", 0},
               {"output_dir", "abl"}};
  testing::write_json(dir / "quad.json", quad);

  testing::write_json(dir / "eval.json", {{"schema_version", 1},
                                          {"checkpoint", "run/checkpoint"},
                                          {"data", data},
                                          {"eval", {{"mc_samples", {0, 1, 8}}}},
                                          {"output_dir", "eval"}});
  testing::write_json(dir / "merge.json", {{"schema_version", 1},
                                           {"theta0", "run/checkpoints/epoch_0001"},
                                           {"tasks", {"run/checkpoints/epoch_0002", "run/checkpoint"}},
                                           {"data", data},
                                           {"output_dir", "merge"}});
  testing::write_json(dir / "sens.json", {{"schema_version", 1},
                                          {"checkpoint", "run/checkpoint"},
                                          {"checkpoints", {"run/checkpoints/epoch_0001", "run/checkpoints/epoch_0002",
                                                           "run/checkpoints/epoch_0003"}},
                                          {"data", data},
                                          {"output_dir", "sens"}});
  json ood_data = blobs_train["data"];
  testing::write_json(dir / "ood.json", {{"schema_version", 1},
                                         {"checkpoint", "blobs_run/checkpoint"},
                                         {"data", ood_data},
                                         {"ood", {{"offset", {6.0, 6.0}}}},
                                         {"mc_samples", 16},
                                         {"output_dir", "ood"}});
  testing::write_json(dir / "plot.json", {{"schema_version", 1},
                                          {"input", "run/trace.csv"},
                                          {"output", "loss.svg"},
                                          {"kind", "line"},
                                          {"x", "step"},
                                          {"y", {"loss"}},
                                          {"title", "loss"}});

  const std::vector<std::pair<std::string, std::string>> jobs{
      {"train", "train.json"},      {"eval", "eval.json"},
      {"merge", "merge.json"},      {"sensitivity", "sens.json"},
      {"ood", "ood.json"},          {"ablate-estimators", "quad.json"},
      {"plot", "plot.json"}};
  std::vector<std::string> differing;
  std::size_t files = 0;
  for (const auto& [cmd, cfg] : jobs) {
    const fs::path a = dir / ("a_" + cmd), b = dir / ("b_" + cmd);
    run(cmd, dir / cfg, a);
    run(cmd, dir / cfg, b);
    const auto sa = snapshot(a), sb = snapshot(b);
    if (sa.empty() || sa != sb) differing.push_back(cmd);
    files += sa.size();
  }
  std::string detail = std::to_string(jobs.size()) + " subcommands, " + std::to_string(files) + " files compared";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> check;
    double max_seconds;  // 0: no limit
  };
  const std::vector<Criterion> criteria{
      {"positivity fuzz", positivity_fuzz, 10.0},
      {"stein oracle", stein_oracle, 30.0},
      {"variational fixed point", variational_fixed_point, 60.0},
      {"gradient correctness", gradient_correctness, 0.0},
      {"accumulation equivalence", accumulation_equivalence, 0.0},
      {"mc averaging benefit", mc_averaging, 0.0},
      {"merging identities", merging, 0.0},
      {"loo faithfulness", loo_faithfulness, 0.0},
      {"metric oracles", metric_oracles, 0.0},
      {"ood separation", ood_separation, 0.0},
      {"determinism", determinism, 0.0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double limit = criteria[i].max_seconds;
    if (limit > 0.0 && secs >= limit) {
      o.pass = false;
      o.detail += ", over the " + num(limit) + " s budget";
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
