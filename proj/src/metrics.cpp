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

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <string>

#include "vonlab/analysis.hpp"
#include "vonlab/error.hpp"

namespace vonlab::analysis {

namespace {

void check_distributions(const Tensor& probs, std::span<const int> labels) {
  require(probs.rank() == 2, ErrorCode::shape, "metrics: probabilities must be [N, C]");
  require(probs.dim(0) == labels.size(), ErrorCode::shape, "metrics: label count mismatch");
  require(!labels.empty(), ErrorCode::invalid_argument, "metrics: no examples");
  const std::size_t c = probs.dim(1);
  for (std::size_t i = 0; i < probs.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = probs[i * c + j];
      require(p >= 0.0 && p <= 1.0 + 1e-12, ErrorCode::invalid_argument,
              "metrics: row " + std::to_string(i) + " has an invalid probability");
      s += p;
    }
    require(std::abs(s - 1.0) <= 1e-9, ErrorCode::invalid_argument,
            "metrics: row " + std::to_string(i) + " does not sum to 1");
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c, ErrorCode::invalid_argument,
            "metrics: label out of range in row " + std::to_string(i));
  }
}

}  // namespace

double expected_calibration_error(const Tensor& probs, std::span<const int> labels, std::size_t bins) {
  check_distributions(probs, labels);
  require(bins >= 1, ErrorCode::invalid_argument, "ece: need at least one bin");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  std::vector<double> conf_sum(bins, 0.0), correct(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (probs[i * c + j] > probs[i * c + arg]) arg = j;
    const double conf = probs[i * c + arg];
    const auto raw = static_cast<std::ptrdiff_t>(std::ceil(conf * static_cast<double>(bins))) - 1;
    const auto b = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(raw, 0, static_cast<std::ptrdiff_t>(bins) - 1));
    conf_sum[b] += conf;
    correct[b] += arg == static_cast<std::size_t>(labels[i]) ? 1.0 : 0.0;
    ++count[b];
  }
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (!count[b]) continue;
    const double k = static_cast<double>(count[b]);
    ece += (k / static_cast<double>(n)) * std::abs(correct[b] / k - conf_sum[b] / k);
  }
  return ece;
}

MetricsRecord compute_metrics(const Tensor& probs, std::span<const int> labels, std::size_t top_k,
                              std::size_t ece_bins) {
  check_distributions(probs, labels);
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  MetricsRecord r;
  r.top_k = top_k;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double py = probs[i * c + y];
    std::size_t above = 0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (probs[i * c + j] > py) ++above;
      if (probs[i * c + j] > probs[i * c + arg]) arg = j;
    }
    r.accuracy += arg == y ? 1.0 : 0.0;
    r.top_k_accuracy += above < top_k ? 1.0 : 0.0;
    r.nll -= std::log(std::max(py, DBL_MIN));
    for (std::size_t j = 0; j < c; ++j) {
      const double d = probs[i * c + j] - (j == y ? 1.0 : 0.0);
      r.brier += d * d;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  r.accuracy *= inv;
  r.top_k_accuracy *= inv;
  r.nll *= inv;
  r.brier *= inv;
  r.ece = expected_calibration_error(probs, labels, ece_bins);
  return r;
}

double auroc(std::span<const double> in, std::span<const double> out) {
  require(!in.empty() && !out.empty(), ErrorCode::invalid_argument, "auroc: empty score list");
  const std::size_t n = in.size() + out.size();
  std::vector<std::pair<double, bool>> all;  // (score, is_out)
  all.reserve(n);
  for (double s : in) all.emplace_back(s, false);
  for (double s : out) all.emplace_back(s, true);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_out = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum_out += avg_rank;
    i = j;
  }
  const double no = static_cast<double>(out.size()), ni = static_cast<double>(in.size());
  return (rank_sum_out - no * (no + 1.0) / 2.0) / (no * ni);
}

double aupr(std::span<const double> scores, const std::vector<bool>& positive) {
  require(scores.size() == positive.size() && !scores.empty(), ErrorCode::invalid_argument,
          "aupr: scores and labels must be non-empty and of equal length");
  const std::size_t n = scores.size();
  const auto total_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  require(total_pos > 0.0, ErrorCode::invalid_argument, "aupr: no positives");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double tp = 0.0, fp = 0.0;
  double prev_recall = 0.0, prev_precision = 1.0, area = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
    i = j;
  }
  return area;
}

OodMetrics compute_ood_metrics(std::span<const double> in, std::span<const double> out) {
  require(!in.empty() && !out.empty(), ErrorCode::invalid_argument, "ood metrics: empty score list");
  OodMetrics m;
  m.auroc = auroc(in, out);

  std::vector<double> in_sorted(in.begin(), in.end()), out_sorted(out.begin(), out.end());
  std::sort(in_sorted.begin(), in_sorted.end());
  std::sort(out_sorted.begin(), out_sorted.end());
  const std::size_t ni = in_sorted.size(), no = out_sorted.size();
  auto count_le = [](const std::vector<double>& v, double t) {
    return static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), t) - v.begin());
  };
  // Smallest k with k / ni >= 0.95, i.e. 20 k >= 19 ni.
  const std::size_t k = (19 * ni + 19) / 20;
  const double threshold = in_sorted[std::max<std::size_t>(k, 1) - 1];
  m.fpr_at_95tpr = static_cast<double>(count_le(out_sorted, threshold)) / static_cast<double>(no);

  // Minimum of (FNR + FPR) / 2 over thresholds at or above the 95%-TPR point.
  std::vector<double> candidates;
  for (double t : in_sorted)
    if (t >= threshold) candidates.push_back(t);
  for (double t : out_sorted)
    if (t >= threshold) candidates.push_back(t);
  double best = 1.0;
  for (double t : candidates) {
    const double tpr = static_cast<double>(count_le(in_sorted, t)) / static_cast<double>(ni);
    const double fpr = static_cast<double>(count_le(out_sorted, t)) / static_cast<double>(no);
    best = std::min(best, 0.5 * ((1.0 - tpr) + fpr));
  }
  m.detection_error = best;

  std::vector<double> scores;
  std::vector<bool> is_in, is_out;
  for (double s : in) {
    scores.push_back(s);
    is_in.push_back(true);
    is_out.push_back(false);
  }
  for (double s : out) {
    scores.push_back(s);
    is_in.push_back(false);
    is_out.push_back(true);
  }
  m.aupr_out = aupr(scores, is_out);
  for (auto& s : scores) s = -s;
  m.aupr_in = aupr(scores, is_in);
  return m;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorCode::invalid_argument, "pearson: need >= 2 paired values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  require(saa > 0.0 && sbb > 0.0, ErrorCode::numerical, "pearson: zero variance series");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace vonlab::analysis
