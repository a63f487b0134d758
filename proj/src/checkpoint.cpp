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

#include "vonlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json_io.hpp"
#include "vonlab/error.hpp"

namespace vonlab::vopt {

namespace {

constexpr int kSchemaVersion = 1;

void write_f64s(std::ofstream& out, std::span<const double> values) {
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

std::vector<double> read_f64s(std::ifstream& in, std::size_t n, const std::string& path) {
  std::vector<double> out(n);
  for (auto& v : out) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    require(in.gcount() == 8, ErrorCode::io, path + ": truncated checkpoint data");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

std::vector<double> Checkpoint::sigma() const { return posterior_sigma(h, delta, lambda); }

std::filesystem::path checkpoint_stem(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".bin" || ext == ".json") return std::filesystem::path(path).replace_extension();
  return path;
}

Checkpoint make_checkpoint(const TrainState& state, const OptimizerConfig& cfg, const models::ModelSpec& spec,
                           const models::LossSpec& loss, std::size_t n_train, const data::Standardizer& standardizer) {
  Checkpoint c;
  c.optimizer = state.kind;
  c.model = spec;
  c.loss = loss;
  c.n_train = n_train;
  c.standardizer = standardizer;
  c.t = state.step;
  switch (state.kind) {
    case OptimizerKind::ivon:
      c.m = state.ivon.m;
      c.h = state.ivon.h;
      c.g = state.ivon.g;
      c.lambda = state.ivon.lambda;
      c.delta = cfg.ivon.delta;
      c.beta1 = cfg.ivon.beta1;
      c.beta2 = cfg.ivon.beta2;
      c.h0 = cfg.ivon.h0;
      c.xi = cfg.ivon.xi;
      break;
    case OptimizerKind::sgd:
      c.m = state.params;
      c.h.assign(state.params.size(), 0.0);
      c.g = state.velocity;
      c.lambda = static_cast<double>(n_train);
      c.delta = cfg.sgd.weight_decay;
      c.beta1 = cfg.sgd.momentum;
      break;
    case OptimizerKind::adamw:
      c.m = state.params;
      c.h = state.adamw.v;
      c.g = state.adamw.m1;
      c.lambda = static_cast<double>(n_train);
      c.delta = cfg.adamw.weight_decay;
      c.beta1 = cfg.adamw.beta1;
      c.beta2 = cfg.adamw.beta2;
      break;
  }
  return c;
}

IvonState ivon_state(const Checkpoint& ckpt) {
  require(ckpt.optimizer == OptimizerKind::ivon, ErrorCode::invalid_argument,
          "checkpoint was not produced by ivon");
  IvonState s;
  s.m = ckpt.m;
  s.h = ckpt.h;
  s.g = ckpt.g;
  s.t = ckpt.t;
  s.lambda = ckpt.lambda;
  s.sigma = ckpt.sigma();
  return s;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto stem = checkpoint_stem(path);
  const std::size_t n = c.m.size();
  require(c.h.size() == n && c.g.size() == n, ErrorCode::shape, "checkpoint: m, h, g lengths differ");
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  const std::string bin = stem.string() + ".bin";
  std::ofstream out(bin, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write " + bin);
  write_f64s(out, c.m.values());
  write_f64s(out, c.h);
  write_f64s(out, c.g);
  require(out.good(), ErrorCode::io, "write failed for " + bin);

  io::json side = {{"schema_version", kSchemaVersion},
                   {"optimizer", std::string(optimizer_name(c.optimizer))},
                   {"lambda", c.lambda},
                   {"delta", c.delta},
                   {"beta1", c.beta1},
                   {"beta2", c.beta2},
                   {"h0", c.h0},
                   {"xi", c.xi ? io::json(*c.xi) : io::json(nullptr)},
                   {"t", c.t},
                   {"n_params", n},
                   {"n_train", c.n_train},
                   {"manifest", io::manifest_to_json(c.m.manifest())}};
  if (c.model) side["model"] = io::model_to_json(*c.model);
  if (c.loss) side["loss"] = io::loss_to_json(*c.loss);
  if (!c.standardizer.empty()) side["standardizer"] = io::standardizer_to_json(c.standardizer);
  io::write_json_file(side, stem.string() + ".json");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto stem = checkpoint_stem(path);
  const std::string js = stem.string() + ".json";
  const auto side = io::read_json_file(js, ErrorCode::io);
  const io::Field f(side, js + "#");
  Checkpoint c;
  c.optimizer = parse_optimizer(f.string_or("optimizer", "ivon"));
  c.lambda = f["lambda"].number();
  c.delta = f["delta"].number();
  c.beta1 = f.number_or("beta1", 0.0);
  c.beta2 = f.number_or("beta2", 0.0);
  c.h0 = f.number_or("h0", 0.0);
  c.xi = f.optional_number("xi");
  c.t = static_cast<std::int64_t>(f["t"].u64());
  c.n_train = f.count_or("n_train", 0);
  const auto manifest = io::manifest_from_json(f["manifest"]);
  if (f.has("model")) c.model = io::model_from_json(f["model"]);
  if (f.has("loss")) c.loss = io::loss_from_json(f["loss"]);
  if (f.has("standardizer")) c.standardizer = io::standardizer_from_json(f["standardizer"]);

  std::size_t n = 0;
  for (const auto& e : manifest) n += shape_numel(e.shape);
  const std::string bin = stem.string() + ".bin";
  std::ifstream in(bin, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open " + bin);
  auto m = read_f64s(in, n, bin);
  c.h = read_f64s(in, n, bin);
  c.g = read_f64s(in, n, bin);
  in.peek();
  require(in.eof(), ErrorCode::io, bin + ": trailing bytes after m, h, g");
  c.m = models::ParamVector(manifest, std::move(m));
  return c;
}

}  // namespace vonlab::vopt
