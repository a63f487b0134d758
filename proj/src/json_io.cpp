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

#include "json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace vonlab::io {

Field Field::operator[](const std::string& key) const {
  if (!node_->is_object()) error("expected an object");
  const std::string p = path_ + "/" + key;
  if (!node_->contains(key)) fail(ErrorCode::config, "config error at " + p + ": missing field");
  return Field((*node_)[key], p);
}

Field Field::at(std::size_t i) const {
  if (!node_->is_array()) error("expected an array");
  if (i >= node_->size()) error("index " + std::to_string(i) + " out of range");
  return Field((*node_)[i], path_ + "/" + std::to_string(i));
}

std::size_t Field::size() const {
  if (!node_->is_array()) error("expected an array");
  return node_->size();
}

void Field::error(const std::string& msg) const {
  fail(ErrorCode::config, "config error at " + (path_.empty() ? std::string("/") : path_) + ": " + msg);
}

double Field::number() const {
  if (!node_->is_number()) error("expected a number");
  const double v = node_->get<double>();
  if (!std::isfinite(v)) error("expected a finite number");
  return v;
}

std::uint64_t Field::u64() const {
  if (!node_->is_number_integer() || (node_->is_number_integer() && !node_->is_number_unsigned() && node_->get<std::int64_t>() < 0))
    error("expected a non-negative integer");
  return node_->get<std::uint64_t>();
}

std::size_t Field::count() const { return static_cast<std::size_t>(u64()); }

bool Field::boolean() const {
  if (!node_->is_boolean()) error("expected true or false");
  return node_->get<bool>();
}

std::string Field::string() const {
  if (!node_->is_string()) error("expected a string");
  return node_->get<std::string>();
}

std::vector<double> Field::numbers() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
  return out;
}

std::vector<std::size_t> Field::counts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).count());
  return out;
}

std::vector<std::string> Field::strings() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).string());
  return out;
}

json manifest_to_json(const models::Manifest& manifest) {
  json arr = json::array();
  for (const auto& e : manifest) arr.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  return arr;
}

models::Manifest manifest_from_json(const Field& f) {
  models::Manifest m;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Field e = f.at(i);
    m.push_back({e["name"].string(), e["shape"].counts(), e["offset"].count()});
  }
  return m;
}

json model_to_json(const models::ModelSpec& spec) {
  return {{"kind", spec.kind == models::ModelKind::mlp ? "mlp" : "logistic"},
          {"layer_widths", spec.layer_widths},
          {"activation", spec.activation == models::Activation::relu ? "relu" : "tanh"},
          {"output", spec.output == models::OutputKind::softmax ? "softmax" : "scalar"}};
}

models::ModelSpec model_from_json(const Field& f) {
  models::ModelSpec spec;
  const std::string kind = f.string_or("kind", "mlp");
  if (kind == "mlp") spec.kind = models::ModelKind::mlp;
  else if (kind == "logistic") spec.kind = models::ModelKind::logistic;
  else f["kind"].error("expected 'mlp' or 'logistic'");
  spec.layer_widths = f["layer_widths"].counts();
  const std::string act = f.string_or("activation", "relu");
  if (act == "relu") spec.activation = models::Activation::relu;
  else if (act == "tanh") spec.activation = models::Activation::tanh;
  else f["activation"].error("expected 'relu' or 'tanh'");
  const std::string out = f.string_or("output", "softmax");
  if (out == "softmax") spec.output = models::OutputKind::softmax;
  else if (out == "scalar") spec.output = models::OutputKind::scalar;
  else f["output"].error("expected 'softmax' or 'scalar'");
  try {
    models::validate(spec);
  } catch (const Error& e) {
    f.error(e.what());
  }
  return spec;
}

json loss_to_json(const models::LossSpec& loss) {
  switch (loss.kind) {
    case models::LossKind::crossentropy: return {{"kind", "crossentropy"}};
    case models::LossKind::mse: return {{"kind", "mse"}};
    case models::LossKind::quadratic_oracle:
      return {{"kind", "quadratic_oracle"}, {"h_diag", loss.h_diag}, {"target", loss.target}};
  }
  return {};
}

models::LossSpec loss_from_json(const Field& f) {
  models::LossSpec loss;
  const std::string kind = f.string_or("kind", "crossentropy");
  if (kind == "crossentropy") {
    loss.kind = models::LossKind::crossentropy;
  } else if (kind == "mse") {
    loss.kind = models::LossKind::mse;
  } else if (kind == "quadratic_oracle") {
    loss.kind = models::LossKind::quadratic_oracle;
    loss.h_diag = f["h_diag"].numbers();
    loss.target = f["target"].numbers();
  } else {
    f["kind"].error("expected 'crossentropy', 'mse' or 'quadratic_oracle'");
  }
  try {
    models::validate(loss);
  } catch (const Error& e) {
    f.error(e.what());
  }
  return loss;
}

json standardizer_to_json(const data::Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

data::Standardizer standardizer_from_json(const Field& f) {
  data::Standardizer s;
  s.mean = f["mean"].numbers();
  s.scale = f["scale"].numbers();
  return s;
}

json read_json_file(const std::string& path, ErrorCode on_parse_error) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    fail(on_parse_error, path + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write " + path);
  out << j.dump(2) << '\n';
  require(out.good(), ErrorCode::io, "write failed for " + path);
}

}  // namespace vonlab::io
