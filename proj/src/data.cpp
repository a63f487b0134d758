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

#include "vonlab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vonlab/error.hpp"
#include "vonlab/rng.hpp"

namespace vonlab::data {

namespace {

constexpr std::uint64_t kMoonsStream = 0x6d6f6f6e;
constexpr std::uint64_t kBlobsStream = 0x626c6f62;
constexpr std::uint64_t kCentersStream = 0x63656e74;
constexpr std::uint64_t kInbetweenStream = 0x31646774;
constexpr std::uint64_t kOodStream = 0x6f6f64;

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace

models::Batch Dataset::as_batch() const {
  models::Batch b;
  b.x = x;
  b.labels = labels;
  b.targets = targets;
  return b;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  const std::size_t d = dim();
  out.x = Tensor({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < size(), ErrorCode::invalid_argument, "subset: row index out of range");
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d,
                out.x.values().begin() + static_cast<std::ptrdiff_t>(r * d));
    if (!labels.empty()) out.labels.push_back(labels[rows[r]]);
    if (!targets.empty()) out.targets.push_back(targets[rows[r]]);
  }
  out.label_kind = label_kind;
  out.num_classes = num_classes;
  out.name = name;
  out.seed = seed;
  return out;
}

Dataset gen_two_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  require(n >= 2 && n % 2 == 0, ErrorCode::invalid_argument, "two_moons: n must be even and >= 2");
  const std::size_t half = n / 2;
  Rng rng = Rng(seed).split(kMoonsStream);
  Dataset ds;
  ds.x = Tensor({n, 2});
  ds.labels.resize(n);
  ds.num_classes = 2;
  ds.name = "two_moons";
  ds.seed = seed;
  const auto t = linspace(0.0, std::numbers::pi, half);
  for (std::size_t i = 0; i < half; ++i) {
    ds.x.at(i, 0) = std::cos(t[i]);
    ds.x.at(i, 1) = std::sin(t[i]);
    ds.labels[i] = 0;
    ds.x.at(half + i, 0) = 1.0 - std::cos(t[i]);
    ds.x.at(half + i, 1) = 0.5 - std::sin(t[i]);
    ds.labels[half + i] = 1;
  }
  if (noise_std > 0.0)
    for (auto& v : ds.x.values()) v += noise_std * rng.gaussian();
  return ds;
}

Dataset gen_blobs(std::size_t k, std::size_t n, double spread, std::vector<std::vector<double>> centers,
                  std::size_t dim, std::uint64_t seed) {
  require(k >= 2, ErrorCode::invalid_argument, "blobs: k must be >= 2");
  require(n >= 1, ErrorCode::invalid_argument, "blobs: n must be >= 1");
  if (centers.empty()) {
    require(dim >= 1, ErrorCode::invalid_argument, "blobs: dim must be >= 1");
    Rng crng = Rng(seed).split(kCentersStream);
    centers.assign(k, std::vector<double>(dim));
    for (auto& c : centers)
      for (auto& v : c) v = -10.0 + 20.0 * crng.uniform();
  }
  require(centers.size() == k, ErrorCode::invalid_argument, "blobs: expected k centers");
  dim = centers.front().size();
  for (const auto& c : centers) require(c.size() == dim, ErrorCode::invalid_argument, "blobs: ragged centers");

  Rng rng = Rng(seed).split(kBlobsStream);
  Dataset ds;
  ds.x = Tensor({n, dim});
  ds.labels.resize(n);
  ds.num_classes = k;
  ds.name = "blobs";
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j) ds.x.at(i, j) = centers[c][j] + spread * rng.gaussian();
  }
  return ds;
}

std::uint64_t ood_seed(std::uint64_t seed) {
  std::uint64_t s = Rng(seed).split(kOodStream).key();
  return s == seed ? s ^ 1u : s;
}

OodPair gen_ood_shift(const Dataset& base, const std::vector<double>& offset) {
  require(offset.size() == base.dim(), ErrorCode::shape,
          "ood_shift: offset has " + std::to_string(offset.size()) + " entries, features have " +
              std::to_string(base.dim()));
  OodPair pair;
  pair.in_domain = base;
  pair.out_domain = base;
  const std::size_t d = base.dim();
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) pair.out_domain.x.at(i, j) += offset[j];
  pair.out_domain.name = base.name + "_shifted";
  return pair;
}

Dataset gen_inbetween_1d(std::size_t n_per_cluster, double gap, std::uint64_t seed) {
  require(gap > 0.0, ErrorCode::invalid_argument, "inbetween_1d: gap must be > 0");
  require(n_per_cluster >= 1, ErrorCode::invalid_argument, "inbetween_1d: need >= 1 point per cluster");
  Rng rng = Rng(seed).split(kInbetweenStream);
  Dataset ds;
  ds.x = Tensor({2 * n_per_cluster, 1});
  ds.labels.resize(2 * n_per_cluster);
  ds.num_classes = 2;
  ds.name = "inbetween_1d";
  ds.seed = seed;
  for (std::size_t i = 0; i < n_per_cluster; ++i) {
    ds.x[i] = -0.5 * gap - rng.uniform();
    ds.labels[i] = 0;
  }
  for (std::size_t i = 0; i < n_per_cluster; ++i) {
    ds.x[n_per_cluster + i] = 0.5 * gap + rng.uniform();
    ds.labels[n_per_cluster + i] = 1;
  }
  return ds;
}

Dataset gen_constant(std::size_t n) {
  require(n >= 1, ErrorCode::invalid_argument, "constant: n must be >= 1");
  Dataset ds;
  ds.x = Tensor({n, 1});
  ds.labels.assign(n, 0);
  ds.num_classes = 1;
  ds.name = "constant";
  return ds;
}

std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t epoch_seed) {
  require(batch_size >= 1, ErrorCode::invalid_argument, "batches: batch_size must be >= 1");
  Rng rng(epoch_seed);
  const auto perm = random_permutation(rng, ds.size());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < perm.size(); i += batch_size) {
    const std::size_t end = std::min(perm.size(), i + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i), perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Split split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorCode::config, "split: test_fraction must be in [0, 1)");
  Rng rng(seed);
  const auto perm = random_permutation(rng, ds.size());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  require(!train.empty(), ErrorCode::config, "split: no training rows left");
  return {ds.subset(train), ds.subset(test)};
}

Standardizer Standardizer::fit(const Dataset& ds) {
  Standardizer s;
  const std::size_t n = ds.size(), d = ds.dim();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += ds.x.at(i, j);
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = ds.x.at(i, j) - s.mean[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(Dataset& ds) const {
  if (empty()) return;
  require(mean.size() == ds.dim(), ErrorCode::shape, "standardizer: feature dimension mismatch");
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.dim(); ++j) ds.x.at(i, j) = (ds.x.at(i, j) - mean[j]) / scale[j];
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) cells.push_back(cur);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, std::size_t line_no, const std::filesystem::path& path) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\r')) --end;
  if (begin < end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end)
    fail(ErrorCode::io, path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + cell + "' as a number");
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::io, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  require(header.size() >= 2 && header.back() == "label", ErrorCode::io,
          path.string() + ":1: header must be f0,...,f{d-1},label");
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j)
    require(header[j] == "f" + std::to_string(j), ErrorCode::io,
            path.string() + ":1: expected column f" + std::to_string(j) + ", got '" + header[j] + "'");
  if (schema.n_features)
    require(*schema.n_features == d, ErrorCode::io,
            path.string() + ":1: header has " + std::to_string(d) + " features, schema expects " +
                std::to_string(*schema.n_features));

  Dataset ds;
  ds.label_kind = schema.label_kind;
  ds.name = path.stem().string();
  std::vector<double> xs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    require(cells.size() == d + 1, ErrorCode::io,
            path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(d + 1) + " cells, got " +
                std::to_string(cells.size()));
    for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_double(cells[j], line_no, path));
    const double label = parse_double(cells[d], line_no, path);
    if (schema.label_kind == LabelKind::class_index) {
      require(label >= 0.0 && std::floor(label) == label, ErrorCode::io,
              path.string() + ":" + std::to_string(line_no) + ": class label must be a non-negative integer");
      ds.labels.push_back(static_cast<int>(label));
      ds.num_classes = std::max(ds.num_classes, static_cast<std::size_t>(label) + 1);
    } else {
      ds.targets.push_back(label);
    }
  }
  const std::size_t n = xs.size() / d;
  require(n >= 1, ErrorCode::io, path.string() + ": no data rows");
  ds.x = Tensor({n, d}, std::move(xs));
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x.at(i, j));
      out << buf << ',';
    }
    if (ds.label_kind == LabelKind::class_index) {
      out << ds.labels[i] << '\n';
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", ds.targets[i]);
      out << buf << '\n';
    }
  }
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

}  // namespace vonlab::data
