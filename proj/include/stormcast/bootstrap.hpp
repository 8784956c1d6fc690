#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/events.hpp"
#include "stormcast/metrics.hpp"

namespace stormcast::eval {

struct BootstrapConfig {
  int block = 168;  // hours per moving block
  int replicates = 500;
  std::uint64_t seed = 1;
  std::vector<int> deltas{0, 6, 12, 24, 36, 48};
  std::vector<int> omegas{6, 12, 24, 36, 48};
  double threshold = 50000.0;
  EventDetectorConfig detector{};
  int mase_lag = 24;
  // When false, prediction events are detected once on the original series
  // and reused across replicates (only the truth is resampled).
  bool resample_prediction_events = true;
};

struct Interval {
  double median = kMissing;
  double lo = kMissing;   // 2.5th percentile
  double hi = kMissing;   // 97.5th percentile
  std::size_t n = 0;      // replicates with a defined value
};

struct BootstrapSummary {
  BootstrapConfig config;
  std::map<int, Interval> cmase_by_delta;
  std::map<int, Interval> recall_by_omega;
  std::map<int, Interval> precision_by_omega;
  std::map<int, Interval> f1_by_omega;
  std::map<int, Interval> hits_by_omega;
};

namespace detail {

inline Interval summarize(std::vector<double> vals) {
  Interval iv;
  std::vector<double> present;
  for (double v : vals)
    if (!is_missing(v)) present.push_back(v);
  iv.n = present.size();
  if (present.empty()) return iv;
  iv.median = quantile(present, 0.5);
  iv.lo = quantile(present, 0.025);
  iv.hi = quantile(std::move(present), 0.975);
  return iv;
}

}  // namespace detail

// Moving-block bootstrap over the jointly-resampled (y, yhat[, mask])
// triple. Reference events are re-detected on each resampled truth; cMASE
// peak sets come from the resampled truth while the seasonal-naive
// denominator is held fixed from the original series. Replicates use RNG
// streams derived from (seed, replicate), so parallel evaluation cannot
// change the result.
inline BootstrapSummary block_bootstrap(const std::vector<double>& y,
                                        const std::vector<double>& yhat,
                                        const BootstrapConfig& cfg,
                                        const std::vector<bool>* mask = nullptr) {
  if (cfg.replicates < 1) throw std::invalid_argument("need B >= 1");
  std::size_t t_len = y.size();
  if (t_len < static_cast<std::size_t>(cfg.block))
    throw std::invalid_argument("series shorter than block length");
  if (yhat.size() != t_len) throw std::invalid_argument("series mismatch");

  double denom = seasonal_naive_mae(y, cfg.mase_lag);

  EventList original_pred_events;
  if (!cfg.resample_prediction_events)
    original_pred_events = detect_events(yhat, cfg.detector, mask);

  std::size_t n_blocks =
      (t_len + static_cast<std::size_t>(cfg.block) - 1) /
      static_cast<std::size_t>(cfg.block);
  std::size_t max_offset = t_len - static_cast<std::size_t>(cfg.block);

  std::size_t B = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::map<int, double>> rep_cmase(B), rep_recall(B),
      rep_precision(B), rep_f1(B), rep_hits(B);

  parallel_for(B, [&](std::size_t rep) {
    Rng rng(derive_seed(cfg.seed, rep));
    std::vector<double> ys, yhs;
    std::vector<bool> ms;
    ys.reserve(t_len);
    yhs.reserve(t_len);
    if (mask) ms.reserve(t_len);
    for (std::size_t b = 0; b < n_blocks && ys.size() < t_len; ++b) {
      std::size_t off = max_offset == 0
                            ? 0
                            : static_cast<std::size_t>(rng.uniform_index(
                                  static_cast<std::uint64_t>(max_offset + 1)));
      for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.block) &&
                              ys.size() < t_len;
           ++k) {
        ys.push_back(y[off + k]);
        yhs.push_back(yhat[off + k]);
        if (mask) ms.push_back((*mask)[off + k]);
      }
    }

    EventList ref_ev = detect_events(ys, cfg.detector, nullptr);
    EventList pred_ev = cfg.resample_prediction_events
                            ? detect_events(yhs, cfg.detector,
                                            mask ? &ms : nullptr)
                            : original_pred_events;
    for (int omega : cfg.omegas) {
      MatchResult mr = match_events(pred_ev, ref_ev, omega);
      EventScores sc = event_prf(mr);
      rep_recall[rep][omega] = sc.recall;
      rep_precision[rep][omega] = sc.precision;
      rep_f1[rep][omega] = sc.f1;
      rep_hits[rep][omega] = static_cast<double>(mr.hits());
    }
    for (int delta : cfg.deltas) {
      CmaseEntry e = cmase(ys, yhs, cfg.threshold, delta, denom,
                           mask ? &ms : nullptr);
      rep_cmase[rep][delta] = e.value;
    }
  });

  BootstrapSummary out;
  out.config = cfg;
  auto collect = [&](const std::vector<std::map<int, double>>& reps, int key) {
    std::vector<double> vals;
    vals.reserve(B);
    for (const auto& r : reps) vals.push_back(r.at(key));
    return detail::summarize(std::move(vals));
  };
  for (int delta : cfg.deltas)
    out.cmase_by_delta[delta] = collect(rep_cmase, delta);
  for (int omega : cfg.omegas) {
    out.recall_by_omega[omega] = collect(rep_recall, omega);
    out.precision_by_omega[omega] = collect(rep_precision, omega);
    out.f1_by_omega[omega] = collect(rep_f1, omega);
    out.hits_by_omega[omega] = collect(rep_hits, omega);
  }
  return out;
}

}  // namespace stormcast::eval
