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

#include "vonlab/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vonlab/error.hpp"

namespace vonlab::plot {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
     << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight) << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& x_label) {
  const double bx = kLeft, by = kHeight - kBottom, tx = kWidth - kRight, ty = kTop;
  os << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\"" << num(tx) << "\" y2=\"" << num(by) << "\"/>\n";
  os << "<line x1=\"" << num(bx) << "\" y1=\"" << num(by) << "\" x2=\"" << num(bx) << "\" y2=\"" << num(ty) << "\"/>\n";
  os << "</g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(by + 14) << "\" text-anchor=\"middle\">" << label_num(xv)
       << "</text>\n";
    os << "<text x=\"" << num(bx - 4) << "\" y=\"" << num(f.py(yv) + 3) << "\" text-anchor=\"end\">" << label_num(yv)
       << "</text>\n";
  }
  if (!x_label.empty())
    os << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n";
  os << "</g>\n";
}

}  // namespace

const std::vector<double>& Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return columns[i];
  fail(ErrorCode::config, "csv has no column '" + name + "'");
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open " + path.string());
  Table t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io, path.string() + ": empty csv");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  t.columns.resize(t.header.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      require(c < t.header.size(), ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": too many cells");
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      require(res.ec == std::errc() && res.ptr == cell.data() + cell.size(), ErrorCode::io,
              path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      t.columns[c++].push_back(v);
    }
    require(c == t.header.size(), ErrorCode::io, path.string() + ":" + std::to_string(lineno) + ": too few cells");
  }
  return t;
}

std::string svg_histogram(const std::vector<double>& lo, const std::vector<double>& hi,
                          const std::vector<double>& counts, const std::string& title) {
  require(lo.size() == hi.size() && lo.size() == counts.size(), ErrorCode::shape, "histogram: column lengths differ");
  Frame f{0.0, 1.0, 0.0, 1.0};
  if (!lo.empty()) {
    f.x0 = *std::min_element(lo.begin(), lo.end());
    f.x1 = *std::max_element(hi.begin(), hi.end());
    f.y1 = std::max(1.0, *std::max_element(counts.begin(), counts.end()));
  }
  widen(f.x0, f.x1);
  std::ostringstream os;
  header(os, title);
  os << "<g class=\"bars\" fill=\"" << kColors[0] << "\">\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] <= 0.0) continue;
    const double x = f.px(lo[i]), w = f.px(hi[i]) - x, y = f.py(counts[i]);
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
       << num(f.py(0.0) - y) << "\"/>\n";
  }
  os << "</g>\n";
  axes(os, f, "");
  os << "</svg>\n";
  return os.str();
}

std::string svg_lineplot(const std::vector<Series>& series, const std::string& title, const std::string& x_label) {
  Frame f{0.0, 1.0, 0.0, 1.0};
  bool any = false;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), ErrorCode::shape, "lineplot: x and y lengths differ for " + s.name);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        f = {s.x[i], s.x[i], s.y[i], s.y[i]};
        any = true;
      }
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  }
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::ostringstream os;
  header(os, title);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (s.x.empty()) continue;
    const char* color = kColors[k % (sizeof kColors / sizeof kColors[0])];
    os << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" d=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << (i ? " L" : "M") << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
    os << "\"/>\n";
    os << "<text x=\"" << num(kWidth - kRight - 4) << "\" y=\"" << num(kTop + 12.0 * static_cast<double>(k + 1))
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << color << "\">"
       << escape(s.name) << "</text>\n";
  }
  axes(os, f, x_label);
  os << "</svg>\n";
  return os.str();
}

}  // namespace vonlab::plot
