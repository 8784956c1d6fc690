#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"

namespace stormcast::eval {

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
};

struct ClassificationMetrics {
  double precision = kMissing;
  double recall = kMissing;
  double f1 = kMissing;
  double prevalence = kMissing;
};

inline ClassificationMetrics classification_metrics(const Confusion& c) {
  if (c.total() == 0) throw std::invalid_argument("empty confusion matrix");
  ClassificationMetrics m;
  if (c.tp + c.fp > 0)
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (!is_missing(m.precision) && !is_missing(m.recall))
    m.f1 = m.precision + m.recall > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
  m.prevalence = static_cast<double>(c.tp + c.fn) / static_cast<double>(c.total());
  return m;
}

struct PrPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // descending threshold order
  double aucpr = 0;             // trapezoid over recall
  double roc_auc = 0;           // rank statistic with tie correction
  double prevalence = 0;
};

// PR curve over every distinct score threshold plus AUCPR and ROC-AUC.
// Throws when labels are single-class.
inline PrCurve pr_curve_auc(const std::vector<double>& scores,
                            const std::vector<double>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("scores/labels mismatch");
  double n_pos = 0, n_neg = 0;
  for (double l : labels) (l != 0.0 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("labels are single-class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  PrCurve curve;
  curve.prevalence = n_pos / (n_pos + n_neg);
  double tp = 0, fp = 0;
  std::size_t i = 0;
  double prev_recall = 0, prev_precision = 1.0;
  while (i < order.size()) {
    double thr = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == thr) {
      (labels[order[j]] != 0.0 ? tp : fp) += 1.0;
      ++j;
    }
    PrPoint pt;
    pt.threshold = thr;
    pt.precision = tp / (tp + fp);
    pt.recall = tp / n_pos;
    curve.points.push_back(pt);
    if (pt.recall > prev_recall) {
      double left = curve.points.size() == 1 ? pt.precision : prev_precision;
      curve.aucpr += (pt.recall - prev_recall) * 0.5 * (left + pt.precision);
    }
    prev_recall = pt.recall;
    prev_precision = pt.precision;
    i = j;
  }

  // ROC-AUC via the Mann-Whitney rank formula with average ranks for ties.
  std::vector<std::size_t> asc(order.rbegin(), order.rend());
  double rank_sum_pos = 0;
  std::size_t k = 0;
  while (k < asc.size()) {
    std::size_t j = k;
    while (j < asc.size() && scores[asc[j]] == scores[asc[k]]) ++j;
    double avg_rank = 0.5 * (static_cast<double>(k + 1) + static_cast<double>(j));
    for (std::size_t t = k; t < j; ++t)
      if (labels[asc[t]] != 0.0) rank_sum_pos += avg_rank;
    k = j;
  }
  curve.roc_auc = (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
  return curve;
}

struct OverallMetrics {
  double rmse = kMissing;
  double mae = kMissing;
  double r2 = kMissing;    // absent for zero-variance truth
  double mase = kMissing;  // absent when the series is too short
  std::size_t n = 0;
};

// Seasonal-naive MAE at lag h over hours where both y_t and y_{t-h} are
// present. This is the shared denominator of MASE and cMASE.
inline double seasonal_naive_mae(const std::vector<double>& y, int h = 24) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t t = static_cast<std::size_t>(h); t < y.size(); ++t) {
    if (is_missing(y[t]) || is_missing(y[t - static_cast<std::size_t>(h)]))
      continue;
    s += std::abs(y[t] - y[t - static_cast<std::size_t>(h)]);
    ++n;
  }
  return n ? s / static_cast<double>(n) : kMissing;
}

// RMSE / MAE / R^2 / MASE on the original scale over hours where both
// series are present. Missing predictions are treated as 0 by the caller
// when the All-hours scope applies.
inline OverallMetrics overall_metrics(const std::vector<double>& y,
                                      const std::vector<double>& yhat,
                                      int h = 24) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("series length mismatch");
  OverallMetrics m;
  double se = 0, ae = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (is_missing(y[t]) || is_missing(yhat[t])) continue;
    double e = y[t] - yhat[t];
    se += e * e;
    ae += std::abs(e);
    sy += y[t];
    ++n;
  }
  if (n == 0) return m;
  m.n = n;
  m.rmse = std::sqrt(se / static_cast<double>(n));
  m.mae = ae / static_cast<double>(n);
  double ybar = sy / static_cast<double>(n);
  double ss_tot = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (is_missing(y[t]) || is_missing(yhat[t])) continue;
    ss_tot += (y[t] - ybar) * (y[t] - ybar);
  }
  if (ss_tot > 0) m.r2 = 1.0 - se / ss_tot;
  if (y.size() >= static_cast<std::size_t>(h) + 2) {
    double denom = seasonal_naive_mae(y, h);
    if (!is_missing(denom) && denom > 0) m.mase = m.mae / denom;
  }
  return m;
}

struct CmaseEntry {
  int delta = 0;
  std::size_t n_hours = 0;    // |S_delta|
  double value = kMissing;    // absent when S_delta is empty
  std::string reason;         // why absent
};

// Peak-conditional MASE: mean |y - yhat| over hours within +/- delta of any
// peak hour (y >= threshold), scaled by a fixed seasonal-naive denominator.
// The optional mask restricts S_delta (the Available-hours scope); missing
// predictions inside S_delta count as 0.
inline CmaseEntry cmase(const std::vector<double>& y,
                        const std::vector<double>& yhat, double threshold,
                        int delta, double denominator,
                        const std::vector<bool>* mask = nullptr) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("series length mismatch");
  CmaseEntry e;
  e.delta = delta;
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 2;
  std::int64_t n_t = static_cast<std::int64_t>(y.size());
  std::vector<std::int64_t> peak_dist(y.size(), inf);
  bool any_peak = false;
  for (std::int64_t t = 0; t < n_t; ++t) {
    std::size_t ti = static_cast<std::size_t>(t);
    if (!is_missing(y[ti]) && y[ti] >= threshold) {
      peak_dist[ti] = 0;
      any_peak = true;
    } else if (t > 0) {
      peak_dist[ti] = peak_dist[ti - 1] + 1;
    }
  }
  for (std::int64_t t = n_t - 2; t >= 0; --t)
    peak_dist[static_cast<std::size_t>(t)] =
        std::min(peak_dist[static_cast<std::size_t>(t)],
                 peak_dist[static_cast<std::size_t>(t) + 1] + 1);
  if (!any_peak) {
    e.reason = "no peak hours at threshold";
    return e;
  }
  double num = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (is_missing(y[t])) continue;
    if (mask && !(*mask)[t]) continue;
    if (peak_dist[t] > delta) continue;
    double pred = is_missing(yhat[t]) ? 0.0 : yhat[t];
    num += std::abs(y[t] - pred);
    ++n;
  }
  e.n_hours = n;
  if (n == 0) {
    e.reason = "S_delta empty under mask";
    return e;
  }
  if (is_missing(denominator) || denominator <= 0) {
    e.reason = "degenerate seasonal-naive denominator";
    return e;
  }
  e.value = (num / static_cast<double>(n)) / denominator;
  return e;
}

}  // namespace stormcast::eval
