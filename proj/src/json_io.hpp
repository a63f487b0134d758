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

// JSON conversions shared by the checkpoint sidecar and experiment configs.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vonlab/data.hpp"
#include "vonlab/error.hpp"
#include "vonlab/model.hpp"

namespace vonlab::io {

using json = nlohmann::json;

// Walks a JSON object while tracking the field path for config errors.
class Field {
 public:
  Field(const json& node, std::string path) : node_(&node), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }
  const json& raw() const noexcept { return *node_; }
  bool has(const std::string& key) const { return node_->is_object() && node_->contains(key) && !(*node_)[key].is_null(); }

  Field operator[](const std::string& key) const;
  Field at(std::size_t i) const;
  std::size_t size() const;

  double number() const;
  std::uint64_t u64() const;
  std::size_t count() const;
  bool boolean() const;
  std::string string() const;
  std::vector<double> numbers() const;
  std::vector<std::size_t> counts() const;
  std::vector<std::string> strings() const;

  double number_or(const std::string& key, double fallback) const { return has(key) ? (*this)[key].number() : fallback; }
  std::size_t count_or(const std::string& key, std::size_t fallback) const { return has(key) ? (*this)[key].count() : fallback; }
  std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const { return has(key) ? (*this)[key].u64() : fallback; }
  bool bool_or(const std::string& key, bool fallback) const { return has(key) ? (*this)[key].boolean() : fallback; }
  std::string string_or(const std::string& key, std::string fallback) const { return has(key) ? (*this)[key].string() : fallback; }
  std::optional<double> optional_number(const std::string& key) const {
    return has(key) ? std::optional<double>((*this)[key].number()) : std::nullopt;
  }

  [[noreturn]] void error(const std::string& msg) const;

 private:
  const json* node_;
  std::string path_;
};

json manifest_to_json(const models::Manifest& manifest);
models::Manifest manifest_from_json(const Field& f);

json model_to_json(const models::ModelSpec& spec);
models::ModelSpec model_from_json(const Field& f);

json loss_to_json(const models::LossSpec& loss);
models::LossSpec loss_from_json(const Field& f);

json standardizer_to_json(const data::Standardizer& s);
data::Standardizer standardizer_from_json(const Field& f);

json read_json_file(const std::string& path, ErrorCode on_parse_error);
void write_json_file(const json& j, const std::string& path);

}  // namespace vonlab::io
