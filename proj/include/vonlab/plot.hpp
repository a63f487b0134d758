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

#include <filesystem>
#include <string>
#include <vector>

namespace vonlab::plot {

// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const;
};

Table read_table(const std::filesystem::path& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Standalone SVG documents. Output depends only on the inputs.
std::string svg_histogram(const std::vector<double>& bin_lo, const std::vector<double>& bin_hi,
                          const std::vector<double>& counts, const std::string& title);
// One <path> per series.
std::string svg_lineplot(const std::vector<Series>& series, const std::string& title, const std::string& x_label);

}  // namespace vonlab::plot
