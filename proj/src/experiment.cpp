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

#include "vonlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json_io.hpp"
#include "vonlab/analysis.hpp"
#include "vonlab/checkpoint.hpp"
#include "vonlab/error.hpp"
#include "vonlab/parallel.hpp"
#include "vonlab/plot.hpp"
#include "vonlab/posterior.hpp"

namespace vonlab::cli {

namespace fs = std::filesystem;
using io::Field;
using io::json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalStream = 3;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text(path, text);
}

// Runs `fn`, rewriting non-config library errors raised while interpreting a
// config section as config errors at that section.
template <class Fn>
auto at_field(const Field& f, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    f.error(e.what());
  }
}

struct Document {
  json root;
  fs::path dir;
  std::string name;

  Field field() const { return Field(root, ""); }
};

Document read_config(const fs::path& path) {
  Document d;
  d.root = io::read_json_file(path.string(), ErrorCode::config);
  d.dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  d.name = path.string();
  const Field f = d.field();
  if (!d.root.is_object()) f.error("expected a JSON object");
  const auto version = f["schema_version"].u64();
  if (version != kSchemaVersion)
    f["schema_version"].error("unsupported schema_version " + std::to_string(version));
  return d;
}

fs::path output_dir(const Document& doc, const RunOptions& opts) {
  if (opts.out_dir) return *opts.out_dir;
  const Field f = doc.field();
  if (!f.has("output_dir")) f.error("output_dir is required when --out is not given");
  return resolve(doc.dir, f["output_dir"].string());
}

std::size_t as_count(const DataConfig& cfg, const std::string& key, double fallback) {
  const double v = cfg.param(key, fallback);
  require(v >= 0.0 && std::floor(v) == v, ErrorCode::config,
          "config error at /data/params/" + key + ": expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

DataConfig parse_data(const Field& f, const fs::path& base) {
  DataConfig d;
  d.generator = f.string_or("generator", "two_moons");
  if (f.has("params")) {
    const Field p = f["params"];
    if (!p.raw().is_object()) p.error("expected an object");
    for (const auto& [key, value] : p.raw().items()) {
      if (key == "centers") continue;
      d.params[key] = p[key].number();
    }
    if (p.has("centers")) {
      const Field c = p["centers"];
      for (std::size_t i = 0; i < c.size(); ++i) d.centers.push_back(c.at(i).numbers());
    }
  }
  if (d.generator == "csv") {
    d.csv_path = resolve(base, f["path"].string());
    const std::string labels = f.string_or("labels", "class");
    if (labels == "class") d.csv_labels = data::LabelKind::class_index;
    else if (labels == "scalar") d.csv_labels = data::LabelKind::scalar;
    else f["labels"].error("expected 'class' or 'scalar'");
  } else if (d.generator != "two_moons" && d.generator != "blobs" && d.generator != "inbetween_1d" &&
             d.generator != "constant") {
    f["generator"].error("unknown generator '" + d.generator + "'");
  }
  d.seed = f.u64_or("seed", 0);
  d.test_fraction = f.number_or("test_fraction", 0.0);
  if (d.test_fraction < 0.0 || d.test_fraction >= 1.0) f["test_fraction"].error("expected a value in [0, 1)");
  d.standardize = f.bool_or("standardize", false);
  return d;
}

EvalConfig parse_eval(const Field& f) {
  EvalConfig e;
  if (f.has("mc_samples")) e.mc_samples = f["mc_samples"].counts();
  e.ece_bins = f.count_or("ece_bins", 15);
  if (e.ece_bins < 1) f["ece_bins"].error("expected >= 1");
  if (f.has("top_k")) e.top_k = f["top_k"].count();
  return e;
}

vopt::Schedule parse_schedule(const Field& f) {
  vopt::Schedule s;
  const std::string kind = f.string_or("kind", "constant");
  if (kind == "constant") s.kind = vopt::ScheduleKind::constant;
  else if (kind == "warmup_cosine") s.kind = vopt::ScheduleKind::warmup_cosine;
  else f["kind"].error("expected 'constant' or 'warmup_cosine'");
  s.warmup_steps = f.count_or("warmup_steps", 0);
  s.total_steps = f.count_or("total_steps", 0);
  s.floor = f.number_or("floor", 0.0);
  if (s.total_steps != 0 && s.warmup_steps > s.total_steps) f["warmup_steps"].error("exceeds total_steps");
  if (s.floor < 0.0 || s.floor > 1.0) f["floor"].error("expected a value in [0, 1]");
  return s;
}

vopt::OptimizerConfig parse_optimizer(const Field& f, std::size_t& devices) {
  vopt::OptimizerConfig c;
  c.kind = at_field(f, [&] { return vopt::parse_optimizer(f.string_or("kind", "ivon")); });
  switch (c.kind) {
    case vopt::OptimizerKind::ivon: {
      auto& v = c.ivon;
      v.alpha0 = f.number_or("lr", v.alpha0);
      v.beta1 = f.number_or("beta1", v.beta1);
      v.beta2 = f.number_or("beta2", v.beta2);
      v.delta = f.number_or("delta", v.delta);
      v.h0 = f.number_or("h0", v.h0);
      v.lambda = f.optional_number("lambda");
      v.xi = f.optional_number("xi");
      v.rescale_lr = f.bool_or("rescale_lr", false);
      v.mc_samples = f.count_or("mc_samples", 1);
      if (f.has("estimator"))
        v.estimator = at_field(f["estimator"], [&] { return vopt::parse_estimator(f["estimator"].string()); });
      const std::string clip = f.string_or("clip_mode", "full_direction");
      if (clip == "full_direction") v.clip_mode = vopt::ClipMode::full_direction;
      else if (clip == "before_decay") v.clip_mode = vopt::ClipMode::before_decay;
      else f["clip_mode"].error("expected 'full_direction' or 'before_decay'");
      v.prior_mean = f.number_or("prior_mean", 0.0);
      at_field(f, [&] { vopt::validate(v); });
      break;
    }
    case vopt::OptimizerKind::sgd:
      c.sgd.lr = f.number_or("lr", c.sgd.lr);
      c.sgd.momentum = f.number_or("momentum", c.sgd.momentum);
      c.sgd.weight_decay = f.number_or("weight_decay", c.sgd.weight_decay);
      if (!(c.sgd.lr > 0.0)) f["lr"].error("expected > 0");
      if (c.sgd.momentum < 0.0 || c.sgd.momentum >= 1.0) f["momentum"].error("expected a value in [0, 1)");
      break;
    case vopt::OptimizerKind::adamw:
      c.adamw.lr = f.number_or("lr", c.adamw.lr);
      c.adamw.beta1 = f.number_or("beta1", c.adamw.beta1);
      c.adamw.beta2 = f.number_or("beta2", c.adamw.beta2);
      c.adamw.eps = f.number_or("eps", c.adamw.eps);
      c.adamw.weight_decay = f.number_or("weight_decay", c.adamw.weight_decay);
      if (!(c.adamw.lr > 0.0)) f["lr"].error("expected > 0");
      break;
  }
  if (f.has("schedule")) c.schedule = parse_schedule(f["schedule"]);
  devices = f.count_or("devices", 1);
  if (devices < 1) f["devices"].error("expected >= 1");
  return c;
}

models::ModelSpec placeholder_model() {
  models::ModelSpec s;
  s.kind = models::ModelKind::logistic;
  s.layer_widths = {1, 1};
  s.output = models::OutputKind::scalar;
  return s;
}

ExperimentConfig parse_experiment(const Document& doc) {
  const Field f = doc.field();
  ExperimentConfig c;
  c.loss = f.has("loss") ? io::loss_from_json(f["loss"]) : models::LossSpec{};
  if (f.has("model")) c.model = io::model_from_json(f["model"]);
  else if (c.loss.kind == models::LossKind::quadratic_oracle) c.model = placeholder_model();
  else f["model"];  // reports the missing field
  if (c.loss.kind == models::LossKind::crossentropy && c.model.output != models::OutputKind::softmax)
    f["model"]["output"].error("crossentropy needs a softmax output");
  if (c.loss.kind == models::LossKind::mse && c.model.output != models::OutputKind::scalar)
    f["model"]["output"].error("mse needs a scalar output");
  c.optimizer = parse_optimizer(f["optimizer"], c.devices);
  c.data = f.has("data") ? parse_data(f["data"], doc.dir) : DataConfig{};
  if (!f.has("data")) {
    if (c.loss.kind != models::LossKind::quadratic_oracle) f["data"];
    c.data.generator = "constant";
  }
  c.epochs = f.count_or("epochs", 1);
  c.batch_size = f.count_or("batch_size", 32);
  if (c.batch_size < 1) f["batch_size"].error("expected >= 1");
  c.seed = f.u64_or("seed", 0);
  if (f.has("eval")) c.eval = parse_eval(f["eval"]);
  if (f.has("output_dir")) c.output_dir = resolve(doc.dir, f["output_dir"].string());
  c.checkpoint_every_epoch = f.bool_or("checkpoint_every_epoch", false);
  return c;
}

// --------------------------------------------------------------------------
// Evaluation helpers

bool is_classifier(const models::ModelSpec& spec, const models::LossSpec& loss) {
  return loss.kind == models::LossKind::crossentropy && spec.output == models::OutputKind::softmax;
}

posterior::GaussianPosterior posterior_of(const vopt::Checkpoint& c) {
  if (c.optimizer == vopt::OptimizerKind::ivon) return {c.m, c.sigma()};
  return {c.m, std::vector<double>(c.m.size(), 0.0)};
}

void write_histogram(const fs::path& path, const posterior::Histogram& h) {
  std::string text = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    text += fmt(h.edges[b]) + "," + fmt(h.edges[b + 1]) + "," + std::to_string(h.counts[b]) + "\n";
  write_text(path, text);
}

json metrics_json(const analysis::MetricsRecord& m) {
  json j = {{"accuracy", m.accuracy}, {"top_k_accuracy", m.top_k_accuracy}, {"top_k", m.top_k},
            {"nll", m.nll}, {"ece", m.ece}, {"brier", m.brier}};
  if (m.ood) {
    j["auroc"] = m.ood->auroc;
    j["fpr_at_95tpr"] = m.ood->fpr_at_95tpr;
    j["detection_error"] = m.ood->detection_error;
    j["aupr_in"] = m.ood->aupr_in;
    j["aupr_out"] = m.ood->aupr_out;
  }
  return j;
}

// S = 0 evaluates at the mean.
Tensor predictive(const models::ModelSpec& spec, const posterior::GaussianPosterior& q, const Tensor& x, std::size_t S,
                  const Rng& eval_rng) {
  if (S == 0) return posterior::predict_at_mean(spec, q, x);
  Rng r = eval_rng.split(S);
  return posterior::predict_mc(spec, q, x, S, r);
}

double quadratic_loss(const models::LossSpec& loss, std::span<const double> theta) {
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i)
    s += 0.5 * loss.h_diag[i] * (theta[i] - loss.target[i]) * (theta[i] - loss.target[i]);
  return s;
}

// One row per entry of `samples`; entropy histograms go to
// <dir>/entropy_hist_<tag>.csv for classifiers.
std::vector<json> evaluate(const models::ModelSpec& spec, const models::LossSpec& loss,
                           const posterior::GaussianPosterior& q, const data::Dataset& ds, const std::string& split,
                           const EvalConfig& ecfg, const std::vector<std::size_t>& samples, const Rng& eval_rng,
                           const fs::path& dir) {
  std::vector<json> rows;
  if (loss.kind == models::LossKind::quadratic_oracle) {
    json row = {{"eval", "mean"},
                {"loss", quadratic_loss(loss, q.m.values())},
                {"m", q.m.values()},
                {"sigma", q.sigma}};
    rows.push_back(row);
    return rows;
  }
  require(ds.size() > 0, ErrorCode::invalid_argument, "evaluation: empty dataset");
  require(ds.dim() == spec.input_dim(), ErrorCode::shape,
          "evaluation: data has " + std::to_string(ds.dim()) + " features, model expects " +
              std::to_string(spec.input_dim()));
  for (std::size_t S : samples) {
    const Tensor p = predictive(spec, q, ds.x, S, eval_rng);
    json row;
    const std::string tag = S == 0 ? std::string("mean") : "S" + std::to_string(S);
    if (is_classifier(spec, loss)) {
      require(ds.label_kind == data::LabelKind::class_index, ErrorCode::shape, "evaluation: classifier needs class labels");
      const std::size_t c = p.cols();
      const analysis::MetricsRecord m =
          analysis::compute_metrics(p, ds.labels, ecfg.top_k.value_or(std::min<std::size_t>(5, c)), ecfg.ece_bins);
      row = metrics_json(m);
      const auto ent = posterior::predictive_entropy(p);
      write_histogram(dir / ("entropy_hist_" + tag + ".csv"), posterior::entropy_histogram(ent, c));
    } else {
      require(ds.label_kind == data::LabelKind::scalar, ErrorCode::shape, "evaluation: regression needs scalar targets");
      double mse = 0.0;
      for (std::size_t i = 0; i < ds.size(); ++i) mse += (p[i] - ds.targets[i]) * (p[i] - ds.targets[i]);
      row["mse"] = mse / static_cast<double>(ds.size());
    }
    row["eval"] = S == 0 ? "mean" : "mc";
    row["S"] = S;
    row["split"] = split;
    row["n"] = ds.size();
    rows.push_back(row);
  }
  return rows;
}

void write_trace(const fs::path& path, const std::vector<vopt::TraceRow>& trace) {
  std::string text = "step,loss,lr,min_h,max_h,grad_norm\n";
  for (const auto& r : trace)
    text += std::to_string(r.step) + "," + fmt(r.loss) + "," + fmt(r.lr) + "," + fmt(r.min_h) + "," + fmt(r.max_h) +
            "," + fmt(r.grad_norm) + "\n";
  write_text(path, text);
}

struct TrainOutcome {
  vopt::TrainResult result;
  PreparedData data;
  vopt::Checkpoint checkpoint;
};

TrainOutcome run_training(const ExperimentConfig& cfg, const fs::path& out, bool per_epoch_checkpoints) {
  PreparedData prepared = prepare_data(cfg.data);
  const Rng root(cfg.seed);
  Rng init_rng = root.split(kInitStream);
  const auto init = models::init_params(cfg.model, cfg.loss, init_rng);

  vopt::TrainOptions topts;
  topts.epochs = cfg.epochs;
  topts.batch_size = cfg.batch_size;
  topts.devices = cfg.devices;
  const std::size_t S = cfg.optimizer.kind == vopt::OptimizerKind::ivon ? cfg.optimizer.ivon.mc_samples : 1;
  topts.threads = std::min(thread_cap(), cfg.devices * S);
  const std::size_t n_train = prepared.split.train.size();
  if (per_epoch_checkpoints) {
    topts.on_epoch_end = [&](std::size_t epoch, const vopt::TrainState& st) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu", epoch);
      vopt::save_checkpoint(
          vopt::make_checkpoint(st, cfg.optimizer, cfg.model, cfg.loss, n_train, prepared.standardizer),
          out / "checkpoints" / name);
    };
  }
  TrainOutcome o{vopt::train_loop(cfg.model, cfg.loss, prepared.split.train, cfg.optimizer, topts, init,
                                  root.split(kTrainStream)),
                 prepared, {}};
  o.checkpoint = vopt::make_checkpoint(o.result.state, cfg.optimizer, cfg.model, cfg.loss, n_train,
                                       o.data.standardizer);
  return o;
}

const data::Dataset& eval_split(const PreparedData& d, std::string& name) {
  if (d.split.test.size() > 0) {
    name = "test";
    return d.split.test;
  }
  name = "train";
  return d.split.train;
}

ExperimentConfig load_with_overrides(const RunOptions& opts, fs::path& out) {
  const Document doc = read_config(opts.config);
  ExperimentConfig cfg = parse_experiment(doc);
  if (opts.seed) cfg.seed = *opts.seed;
  out = output_dir(doc, opts);
  return cfg;
}

// Data selection for commands that evaluate a stored checkpoint.
data::Dataset select_data(const DataConfig& cfg, const std::string& which, const data::Standardizer& standardizer,
                          std::optional<std::uint64_t> seed_override = {}) {
  data::Dataset ds = generate(cfg, seed_override);
  if (cfg.test_fraction > 0.0 && which != "all") {
    data::Split sp = data::split(ds, cfg.test_fraction, cfg.seed);
    ds = which == "train" ? std::move(sp.train) : std::move(sp.test);
  }
  if (!standardizer.empty() && ds.size() > 0) standardizer.apply(ds);
  return ds;
}

std::string split_name(const Field& f, const char* fallback) {
  const std::string s = f.string_or("split", fallback);
  if (s != "train" && s != "test" && s != "all") f["split"].error("expected 'train', 'test' or 'all'");
  return s;
}

struct LoadedModel {
  vopt::Checkpoint ckpt;
  models::ModelSpec spec;
  models::LossSpec loss;
};

LoadedModel load_model(const Document& doc, const fs::path& ckpt_path) {
  const Field f = doc.field();
  LoadedModel lm{vopt::load_checkpoint(ckpt_path), {}, {}};
  if (f.has("model")) lm.spec = io::model_from_json(f["model"]);
  else if (lm.ckpt.model) lm.spec = *lm.ckpt.model;
  else f["model"];
  if (f.has("loss")) lm.loss = io::loss_from_json(f["loss"]);
  else if (lm.ckpt.loss) lm.loss = *lm.ckpt.loss;
  require(models::make_manifest(lm.spec, lm.loss) == lm.ckpt.m.manifest(), ErrorCode::shape,
          "checkpoint manifest does not match the model in " + doc.name);
  return lm;
}

std::uint64_t run_seed(const Field& f, const RunOptions& opts) { return opts.seed ? *opts.seed : f.u64_or("seed", 0); }

}  // namespace

double DataConfig::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

ExperimentConfig load_experiment(const fs::path& path) { return parse_experiment(read_config(path)); }

data::Dataset generate(const DataConfig& cfg, std::optional<std::uint64_t> seed_override) {
  const std::uint64_t seed = seed_override.value_or(cfg.seed);
  data::Dataset ds;
  if (cfg.generator == "two_moons") {
    ds = data::gen_two_moons(as_count(cfg, "n", 200), cfg.param("noise", 0.1), seed);
  } else if (cfg.generator == "blobs") {
    ds = data::gen_blobs(as_count(cfg, "k", 3), as_count(cfg, "n", 300), cfg.param("spread", 1.0), cfg.centers,
                         as_count(cfg, "dim", 2), seed);
  } else if (cfg.generator == "inbetween_1d") {
    ds = data::gen_inbetween_1d(as_count(cfg, "n_per_cluster", 50), cfg.param("gap", 2.0), seed);
  } else if (cfg.generator == "constant") {
    ds = data::gen_constant(as_count(cfg, "n", 1));
  } else if (cfg.generator == "csv") {
    data::CsvSchema schema;
    schema.label_kind = cfg.csv_labels;
    ds = data::load_csv(cfg.csv_path, schema);
  } else {
    fail(ErrorCode::config, "config error at /data/generator: unknown generator '" + cfg.generator + "'");
  }
  return ds;
}

PreparedData prepare_data(const DataConfig& cfg) {
  PreparedData p;
  data::Dataset ds = generate(cfg);
  if (cfg.test_fraction > 0.0) {
    p.split = data::split(ds, cfg.test_fraction, cfg.seed);
  } else {
    p.split.train = std::move(ds);
  }
  if (cfg.standardize) {
    p.standardizer = data::Standardizer::fit(p.split.train);
    p.standardizer.apply(p.split.train);
    if (p.split.test.size() > 0) p.standardizer.apply(p.split.test);
  }
  return p;
}

void cmd_train(const RunOptions& opts) {
  fs::path out;
  const ExperimentConfig cfg = load_with_overrides(opts, out);
  fs::create_directories(out);
  const TrainOutcome o = run_training(cfg, out, cfg.checkpoint_every_epoch);
  vopt::save_checkpoint(o.checkpoint, out / "checkpoint");
  write_trace(out / "trace.csv", o.result.trace);

  std::string split;
  const data::Dataset& ds = eval_split(o.data, split);
  std::vector<std::size_t> samples{0};
  if (cfg.optimizer.kind == vopt::OptimizerKind::ivon)
    for (std::size_t S : cfg.eval.mc_samples)
      if (S > 0) samples.push_back(S);
  const Rng eval_rng = Rng(cfg.seed).split(kEvalStream);
  write_jsonl(out / "metrics.jsonl",
              evaluate(cfg.model, cfg.loss, posterior_of(o.checkpoint), ds, split, cfg.eval, samples, eval_rng, out));
}

void cmd_eval(const RunOptions& opts) {
  const Document doc = read_config(opts.config);
  const Field f = doc.field();
  const fs::path out = output_dir(doc, opts);
  const LoadedModel lm = load_model(doc, resolve(doc.dir, f["checkpoint"].string()));
  const DataConfig dcfg = parse_data(f["data"], doc.dir);
  const EvalConfig ecfg = f.has("eval") ? parse_eval(f["eval"]) : EvalConfig{};
  const std::string which = split_name(f, "test");
  const data::Dataset ds = select_data(dcfg, which, lm.ckpt.standardizer);
  fs::create_directories(out);
  const Rng eval_rng = Rng(run_seed(f, opts)).split(kEvalStream);
  write_jsonl(out / "metrics.jsonl", evaluate(lm.spec, lm.loss, posterior_of(lm.ckpt), ds, which, ecfg,
                                              ecfg.mc_samples, eval_rng, out));
}

void cmd_merge(const RunOptions& opts) {
  const Document doc = read_config(opts.config);
  const Field f = doc.field();
  const fs::path out = output_dir(doc, opts);
  const vopt::Checkpoint base = vopt::load_checkpoint(resolve(doc.dir, f["theta0"].string()));
  const Field tasks = f["tasks"];
  if (tasks.size() == 0) tasks.error("need at least one task checkpoint");

  analysis::MergeInput in{base.m, base.h, {}};
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const vopt::Checkpoint c = vopt::load_checkpoint(resolve(doc.dir, tasks.at(t).string()));
    require(c.m.manifest() == base.m.manifest(), ErrorCode::shape,
            "merge: task " + std::to_string(t) + " manifest does not match theta0");
    in.tasks.push_back({c.m, c.h});
  }
  vopt::Checkpoint merged = base;
  merged.m = analysis::merge_models(in);
  for (std::size_t i = 0; i < merged.h.size(); ++i) {
    std::vector<double> hs;
    for (const auto& t : in.tasks) hs.push_back(t.h[i]);
    std::sort(hs.begin(), hs.end());
    merged.h[i] = std::accumulate(hs.begin(), hs.end(), base.h[i]);
  }
  merged.g.assign(merged.m.size(), 0.0);
  merged.t = 0;
  fs::create_directories(out);
  vopt::save_checkpoint(merged, out / "merged");

  if (f.has("data")) {
    const LoadedModel lm = load_model(doc, out / "merged");
    const DataConfig dcfg = parse_data(f["data"], doc.dir);
    EvalConfig ecfg;
    if (f.has("eval")) ecfg = parse_eval(f["eval"]);
    else ecfg.mc_samples = {0};
    const std::string which = split_name(f, "test");
    const data::Dataset ds = select_data(dcfg, which, lm.ckpt.standardizer);
    const Rng eval_rng = Rng(run_seed(f, opts)).split(kEvalStream);
    write_jsonl(out / "metrics.jsonl", evaluate(lm.spec, lm.loss, posterior_of(lm.ckpt), ds, which, ecfg,
                                                ecfg.mc_samples, eval_rng, out));
  }
}

void cmd_sensitivity(const RunOptions& opts) {
  const Document doc = read_config(opts.config);
  const Field f = doc.field();
  const fs::path out = output_dir(doc, opts);
  const DataConfig dcfg = parse_data(f["data"], doc.dir);
  const bool diagonal = f.bool_or("diagonal", false);
  const double scale = f.number_or("sigma2_scale", 1.0);
  if (scale < 0.0) f["sigma2_scale"].error("expected >= 0");
  std::optional<vopt::OptimizerKind> kind;
  if (f.has("optimizer_kind"))
    kind = at_field(f["optimizer_kind"], [&] { return vopt::parse_optimizer(f["optimizer_kind"].string()); });

  auto variances = [&](const vopt::Checkpoint& c) {
    const vopt::OptimizerKind k = kind.value_or(c.optimizer);
    require(k == vopt::OptimizerKind::sgd || c.optimizer == k, ErrorCode::invalid_argument,
            std::string("sensitivity: checkpoint has no ") + (k == vopt::OptimizerKind::ivon ? "IVON h" : "AdamW second moment") +
                " (written by " + std::string(vopt::optimizer_name(c.optimizer)) + ")");
    auto s2 = analysis::sigma2_adhoc(k, c.h, static_cast<double>(c.n_train), c.delta, c.lambda);
    for (auto& v : s2) v *= scale;
    return s2;
  };

  const LoadedModel lm = load_model(doc, resolve(doc.dir, f["checkpoint"].string()));
  const data::Dataset train = select_data(dcfg, "train", lm.ckpt.standardizer);
  auto records = analysis::sensitivities(lm.spec, train, lm.ckpt.m, variances(lm.ckpt), diagonal);
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  std::string text = "rank,example_id,score,variance_trace,error_l1\n";
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t c = rec.error.size();
    double tr = 0.0, el1 = 0.0;
    for (std::size_t a = 0; a < c; ++a) {
      tr += rec.variance[a * c + a];
      el1 += std::abs(rec.error[a]);
    }
    text += std::to_string(r) + "," + std::to_string(rec.example_id) + "," + fmt(rec.score) + "," + fmt(tr) + "," +
            fmt(el1) + "\n";
  }
  fs::create_directories(out);
  write_text(out / "sensitivity.csv", text);

  // LOO series over the supplied checkpoints (default: the main one).
  std::vector<fs::path> series;
  if (f.has("checkpoints")) {
    for (const auto& p : f["checkpoints"].strings()) series.push_back(resolve(doc.dir, p));
  } else {
    series.push_back(resolve(doc.dir, f["checkpoint"].string()));
  }
  const bool has_test = dcfg.test_fraction > 0.0;
  std::vector<double> loo_values, test_nll;
  std::string loo = has_test ? "index,step,loo,train_loss,test_nll\n" : "index,step,loo,train_loss\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const LoadedModel m = load_model(doc, series[i]);
    const data::Dataset tr = select_data(dcfg, "train", m.ckpt.standardizer);
    const auto r = analysis::loo_estimate(m.spec, m.loss, tr, m.ckpt.m, variances(m.ckpt), diagonal);
    loo += std::to_string(i) + "," + std::to_string(m.ckpt.t) + "," + fmt(r.loo) + "," + fmt(r.train_loss);
    loo_values.push_back(r.loo);
    if (has_test) {
      const data::Dataset te = select_data(dcfg, "test", m.ckpt.standardizer);
      const auto held = analysis::loo_estimate(m.spec, m.loss, te, m.ckpt.m,
                                               std::vector<double>(m.ckpt.m.size(), 0.0), false);
      test_nll.push_back(held.train_loss);
      loo += "," + fmt(held.train_loss);
    }
    loo += "\n";
  }
  write_text(out / "loo.csv", loo);
  if (has_test && series.size() >= 2) {
    json summary = {{"checkpoints", series.size()}};
    try {
      summary["pearson_loo_test"] = analysis::pearson(loo_values, test_nll);
    } catch (const Error&) {
      summary["pearson_loo_test"] = nullptr;
    }
    io::write_json_file(summary, (out / "loo_summary.json").string());
  }
}

void cmd_ood(const RunOptions& opts) {
  const Document doc = read_config(opts.config);
  const Field f = doc.field();
  const fs::path out = output_dir(doc, opts);
  const LoadedModel lm = load_model(doc, resolve(doc.dir, f["checkpoint"].string()));
  require(is_classifier(lm.spec, lm.loss), ErrorCode::config, "ood: needs a softmax classifier checkpoint");
  const DataConfig dcfg = parse_data(f["data"], doc.dir);
  const std::vector<double> offset = f["ood"]["offset"].numbers();
  const std::size_t S = f.count_or("mc_samples", 64);
  const std::string which = split_name(f, "test");

  // Both domains are shifted in raw feature space, then standardized alike.
  data::Standardizer none;
  data::Dataset in = select_data(dcfg, which, none);
  const data::Dataset base = select_data(dcfg, which, none, data::ood_seed(dcfg.seed));
  data::Dataset shifted = at_field(f["ood"]["offset"], [&] { return data::gen_ood_shift(base, offset).out_domain; });
  if (!lm.ckpt.standardizer.empty()) {
    lm.ckpt.standardizer.apply(in);
    lm.ckpt.standardizer.apply(shifted);
  }
  const auto q = posterior_of(lm.ckpt);
  const Rng eval_rng = Rng(run_seed(f, opts)).split(kEvalStream);
  const Tensor p_in = predictive(lm.spec, q, in.x, S, eval_rng.split(1));
  const Tensor p_out = predictive(lm.spec, q, shifted.x, S, eval_rng.split(2));
  const auto e_in = posterior::predictive_entropy(p_in);
  const auto e_out = posterior::predictive_entropy(p_out);
  const std::size_t c = p_in.cols();

  analysis::MetricsRecord m = analysis::compute_metrics(p_in, in.labels, std::min<std::size_t>(5, c));
  m.ood = analysis::compute_ood_metrics(e_in, e_out);
  json row = metrics_json(m);
  row["S"] = S;
  row["n_in"] = in.size();
  row["n_out"] = shifted.size();
  fs::create_directories(out);
  write_jsonl(out / "ood.jsonl", {row});
  write_histogram(out / "entropy_hist_in.csv", posterior::entropy_histogram(e_in, c));
  write_histogram(out / "entropy_hist_out.csv", posterior::entropy_histogram(e_out, c));
  std::string scores = "score,domain_label\n";
  for (double e : e_in) scores += fmt(e) + ",0\n";
  for (double e : e_out) scores += fmt(e) + ",1\n";
  write_text(out / "scores.csv", scores);
}

void cmd_ablate_estimators(const RunOptions& opts) {
  const Document doc = read_config(opts.config);
  fs::path out;
  ExperimentConfig cfg = load_with_overrides(opts, out);
  if (cfg.optimizer.kind != vopt::OptimizerKind::ivon) doc.field()["optimizer"]["kind"].error("ablation needs ivon");
  fs::create_directories(out);
  std::vector<json> rows;
  for (const auto e : {vopt::HessianEstimator::reparam, vopt::HessianEstimator::sq_grad,
                       vopt::HessianEstimator::gauss_newton}) {
    ExperimentConfig run = cfg;
    run.optimizer.ivon.estimator = e;
    const std::string name(vopt::estimator_name(e));
    const TrainOutcome o = run_training(run, out, false);
    write_trace(out / ("trace_" + name + ".csv"), o.result.trace);
    const auto& h = o.checkpoint.h;
    json row = {{"estimator", name},
                {"steps", o.result.trace.size()},
                {"final_loss", o.result.trace.empty() ? 0.0 : o.result.trace.back().loss},
                {"min_h", h.empty() ? 0.0 : *std::min_element(h.begin(), h.end())},
                {"max_h", h.empty() ? 0.0 : *std::max_element(h.begin(), h.end())},
                {"mean_h", h.empty() ? 0.0 : std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size())}};
    if (run.loss.kind == models::LossKind::quadratic_oracle) {
      double err = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i)
        err = std::max(err, std::abs(h[i] - run.loss.h_diag[i]) / run.loss.h_diag[i]);
      row["h_rel_err"] = err;
      row["m"] = o.checkpoint.m.values();
      row["sigma"] = o.checkpoint.sigma();
    } else if (is_classifier(run.model, run.loss)) {
      std::string split;
      const data::Dataset& ds = eval_split(o.data, split);
      const Tensor p = posterior::predict_at_mean(run.model, posterior_of(o.checkpoint), ds.x);
      const auto m = analysis::compute_metrics(p, ds.labels, std::min<std::size_t>(5, p.cols()), run.eval.ece_bins);
      row["accuracy"] = m.accuracy;
      row["nll"] = m.nll;
      row["split"] = split;
    }
    rows.push_back(row);
  }
  write_jsonl(out / "ablation.jsonl", rows);
}

void cmd_plot(const RunOptions& opts) {
  const Document doc = read_config(opts.config);
  const Field f = doc.field();
  const fs::path input = resolve(doc.dir, f["input"].string());
  const fs::path name = f["output"].string();
  const fs::path output = opts.out_dir ? *opts.out_dir / name.filename() : resolve(doc.dir, name);
  const std::string kind = f.string_or("kind", "line");
  const std::string title = f.string_or("title", "");
  const plot::Table t = plot::read_table(input);
  std::string svg;
  if (kind == "histogram") {
    svg = plot::svg_histogram(t.column(f.string_or("lo", "bin_lo")), t.column(f.string_or("hi", "bin_hi")),
                              t.column(f.string_or("count", "count")), title);
  } else if (kind == "line") {
    const std::string x = f["x"].string();
    std::vector<plot::Series> series;
    for (const auto& y : f["y"].strings()) series.push_back({y, t.column(x), t.column(y)});
    svg = plot::svg_lineplot(series, title, x);
  } else {
    f["kind"].error("expected 'histogram' or 'line'");
  }
  write_text(output, svg);
}

void run_command(const std::string& name, const RunOptions& opts) {
  if (name == "train") return cmd_train(opts);
  if (name == "eval") return cmd_eval(opts);
  if (name == "merge") return cmd_merge(opts);
  if (name == "sensitivity") return cmd_sensitivity(opts);
  if (name == "ood") return cmd_ood(opts);
  if (name == "ablate-estimators") return cmd_ablate_estimators(opts);
  if (name == "plot") return cmd_plot(opts);
  fail(ErrorCode::config, "unknown subcommand '" + name + "'");
}

}  // namespace vonlab::cli
