#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stormcast/core.hpp"

namespace stormcast::eval {

struct EventDetectorConfig {
  double threshold = 50000.0;
  int ma_window = 5;    // centered moving average width (odd)
  int merge_gap = 24;   // segments this many sub-threshold hours apart merge
};

struct Event {
  std::int64_t time = 0;  // index into the series
  double magnitude = 0;   // raw series value at `time`
};

struct EventList {
  std::vector<Event> events;
  EventDetectorConfig config;
};

// Centered moving average with truncated edge windows. Masked-out or
// missing hours are excluded from the window mean and cannot host an event.
inline std::vector<double> centered_moving_average(
    const std::vector<double>& y, int width,
    const std::vector<bool>* mask = nullptr) {
  std::vector<double> out(y.size(), kMissing);
  int half = width / 2;
  auto usable = [&](std::size_t t) {
    return !is_missing(y[t]) && (!mask || (*mask)[t]);
  };
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!usable(t)) continue;
    double s = 0;
    int n = 0;
    std::int64_t lo = static_cast<std::int64_t>(t) - half;
    std::int64_t hi = static_cast<std::int64_t>(t) + half;
    for (std::int64_t k = std::max<std::int64_t>(lo, 0);
         k <= hi && k < static_cast<std::int64_t>(y.size()); ++k) {
      if (!usable(static_cast<std::size_t>(k))) continue;
      s += y[static_cast<std::size_t>(k)];
      ++n;
    }
    if (n > 0) out[t] = s / n;
  }
  return out;
}

// Cluster-based peak detector: smooth, threshold, merge nearby segments,
// then report the raw-series argmax of each merged segment (earliest on
// ties) with its raw magnitude.
inline EventList detect_events(const std::vector<double>& y,
                               const EventDetectorConfig& cfg = {},
                               const std::vector<bool>* mask = nullptr) {
  EventList out;
  out.config = cfg;
  if (y.empty()) return out;
  std::vector<double> smoothed = centered_moving_average(y, cfg.ma_window, mask);

  // Maximal contiguous runs with smoothed >= threshold.
  std::vector<std::pair<std::int64_t, std::int64_t>> segments;
  std::int64_t n = static_cast<std::int64_t>(y.size());
  std::int64_t start = -1;
  for (std::int64_t t = 0; t <= n; ++t) {
    bool on = t < n && !is_missing(smoothed[static_cast<std::size_t>(t)]) &&
              smoothed[static_cast<std::size_t>(t)] >= cfg.threshold;
    if (on && start < 0) start = t;
    if (!on && start >= 0) {
      segments.emplace_back(start, t - 1);
      start = -1;
    }
  }

  // Merge segments separated by <= merge_gap strictly-between hours.
  std::vector<std::pair<std::int64_t, std::int64_t>> merged;
  for (const auto& seg : segments) {
    if (!merged.empty() && seg.first - merged.back().second - 1 <= cfg.merge_gap)
      merged.back().second = seg.second;
    else
      merged.push_back(seg);
  }

  for (const auto& [lo, hi] : merged) {
    std::int64_t best = -1;
    double best_val = 0;
    for (std::int64_t t = lo; t <= hi; ++t) {
      std::size_t ti = static_cast<std::size_t>(t);
      if (is_missing(y[ti]) || (mask && !(*mask)[ti])) continue;
      if (best < 0 || y[ti] > best_val) {
        best = t;
        best_val = y[ti];
      }
    }
    if (best >= 0) out.events.push_back({best, best_val});
  }
  return out;
}

struct MatchResult {
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;  // (pred, ref)
  std::vector<std::int64_t> misses;        // unmatched reference times
  std::vector<std::int64_t> false_alarms;  // unmatched prediction times
  int omega = 0;

  std::size_t hits() const { return pairs.size(); }
};

// Greedy one-to-one nearest-time matching within +/- omega hours. Candidate
// pairs are taken in order of |dt|, breaking ties by earlier reference then
// earlier prediction.
inline MatchResult match_events(const EventList& pred, const EventList& ref,
                                int omega) {
  MatchResult out;
  out.omega = omega;
  struct Cand {
    std::int64_t adt;
    std::int64_t ref_time;
    std::int64_t pred_time;
    std::size_t pi, ri;
  };
  std::vector<Cand> cands;
  for (std::size_t pi = 0; pi < pred.events.size(); ++pi)
    for (std::size_t ri = 0; ri < ref.events.size(); ++ri) {
      std::int64_t dt = pred.events[pi].time - ref.events[ri].time;
      std::int64_t adt = dt < 0 ? -dt : dt;
      if (adt <= omega)
        cands.push_back({adt, ref.events[ri].time, pred.events[pi].time, pi, ri});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.adt != b.adt) return a.adt < b.adt;
    if (a.ref_time != b.ref_time) return a.ref_time < b.ref_time;
    return a.pred_time < b.pred_time;
  });
  std::vector<bool> pred_used(pred.events.size(), false);
  std::vector<bool> ref_used(ref.events.size(), false);
  for (const Cand& c : cands) {
    if (pred_used[c.pi] || ref_used[c.ri]) continue;
    pred_used[c.pi] = true;
    ref_used[c.ri] = true;
    out.pairs.emplace_back(c.pred_time, c.ref_time);
  }
  for (std::size_t ri = 0; ri < ref.events.size(); ++ri)
    if (!ref_used[ri]) out.misses.push_back(ref.events[ri].time);
  for (std::size_t pi = 0; pi < pred.events.size(); ++pi)
    if (!pred_used[pi]) out.false_alarms.push_back(pred.events[pi].time);
  return out;
}

struct EventScores {
  double precision = kMissing;  // absent when undefined (no predictions)
  double recall = kMissing;
  double f1 = kMissing;
};

inline EventScores event_prf(std::size_t hits, std::size_t misses,
                             std::size_t false_alarms) {
  EventScores s;
  if (hits + false_alarms > 0)
    s.precision = static_cast<double>(hits) / (hits + false_alarms);
  if (hits + misses > 0)
    s.recall = static_cast<double>(hits) / (hits + misses);
  if (!is_missing(s.precision) && !is_missing(s.recall) &&
      s.precision + s.recall > 0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  else if (!is_missing(s.precision) && !is_missing(s.recall))
    s.f1 = 0.0;
  return s;
}

inline EventScores event_prf(const MatchResult& m) {
  return event_prf(m.hits(), m.misses.size(), m.false_alarms.size());
}

}  // namespace stormcast::eval
