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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vonlab/model.hpp"
#include "vonlab/tensor.hpp"

namespace vonlab::data {

enum class LabelKind { class_index, scalar };

struct Dataset {
  Tensor x;                     // [n, d]
  std::vector<int> labels;      // class_index datasets
  std::vector<double> targets;  // scalar datasets
  LabelKind label_kind = LabelKind::class_index;
  std::size_t num_classes = 0;
  std::string name;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return x.rank() == 2 ? x.dim(0) : 0; }
  std::size_t dim() const noexcept { return x.rank() == 2 ? x.dim(1) : 0; }

  models::Batch as_batch() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

Dataset gen_two_moons(std::size_t n, double noise_std, std::uint64_t seed);

// Labels are i % k, so class counts differ by at most one. When `centers` is
// empty they are drawn uniformly from [-10, 10]^dim.
Dataset gen_blobs(std::size_t k, std::size_t n, double spread, std::vector<std::vector<double>> centers,
                  std::size_t dim, std::uint64_t seed);

struct OodPair {
  Dataset in_domain;
  Dataset out_domain;
};

// out-domain = base features + offset; labels kept but unused.
OodPair gen_ood_shift(const Dataset& base, const std::vector<double>& offset);

// Seed for an out-of-domain base draw that never coincides with `seed`.
std::uint64_t ood_seed(std::uint64_t seed);

// Two 1-D clusters, [-gap/2 - 1, -gap/2] (class 0) and [gap/2, gap/2 + 1]
// (class 1), n points each.
Dataset gen_inbetween_1d(std::size_t n_per_cluster, double gap, std::uint64_t seed);

// n rows of a single zero feature, label 0. Placeholder data for
// data-independent losses such as the quadratic oracle.
Dataset gen_constant(std::size_t n);

// Seeded per-epoch shuffle split into batch_size chunks; the final partial
// batch is kept at its true size.
std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed);

struct Split {
  Dataset train;
  Dataset test;
};

// Seeded permutation, then the first round(n * test_fraction) rows go to test.
Split split(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& ds);
  void apply(Dataset& ds) const;
  bool empty() const noexcept { return mean.empty(); }
};

struct CsvSchema {
  std::optional<std::size_t> n_features;  // inferred from the header when unset
  LabelKind label_kind = LabelKind::class_index;
};

// Header f0,...,f{d-1},label.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace vonlab::data
