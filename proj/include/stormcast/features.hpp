#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/geo.hpp"
#include "stormcast/ingest.hpp"

namespace stormcast::features {

inline constexpr std::array<int, 4> kWindows{6, 12, 24, 48};

// County-level parameter series on a shared contiguous hour axis, as
// produced by the interpolation stage.
struct CountySeries {
  std::vector<std::string> counties;
  std::int64_t start_hour = 0;
  std::size_t n_hours = 0;
  std::map<std::string, std::vector<std::vector<double>>> params;  // [county][hour]

  const std::vector<std::vector<double>>& param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end())
      throw std::invalid_argument("missing parameter series: " + name);
    return it->second;
  }
};

struct CountyStatic {
  std::string county_id;
  double population = 0;
  double area_km2 = 0;
  double lon = 0;
  double lat = 0;
};

struct IdwConfig {
  int k = 5;
  double power = 2.0;
};

// Row-major dense feature matrix; rows are ordered hour-major so that row
// order is time order (ties broken by county order).
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<int> county_index;       // per row
  std::vector<std::int64_t> hours;     // per row (the observation time t0)
  std::vector<std::string> counties;   // county id per county index
  std::vector<double> x;               // [n_rows * n_features]
  std::vector<double> flag48;          // 0/1 or NaN
  std::vector<double> log_mag48;       // NaN when t0+48 missing

  std::size_t n_rows() const { return hours.size(); }
  std::size_t n_features() const { return feature_names.size(); }
  double& at(std::size_t r, std::size_t c) { return x[r * n_features() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return x[r * n_features() + c];
  }
  int feature(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
      if (feature_names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

// Column order of the engineered feature set. The trailing county encoding
// complements the 87 named columns.
inline std::vector<std::string> feature_table() {
  std::vector<std::string> names = {"dwpf", "tmpf", "alti",  "mslp",
                                    "gust", "p01i", "sknt",  "drct_u",
                                    "drct_v", "relh", "relh_grad", "sq_flag",
                                    "ts_flag", "hr_flag"};
  auto add_windows = [&](const std::string& base) {
    for (int w : kWindows) names.push_back(base + "_" + std::to_string(w) + "h");
  };
  for (const char* p : {"dwpf", "tmpf", "drct_u", "drct_v"})
    add_windows(std::string(p) + "_lag");
  add_windows("p01i_rolling_sum");
  add_windows("alti_rolling_mean");
  add_windows("mslp_rolling_mean");
  add_windows("relh_rolling_mean");
  add_windows("gust_rolling_max");
  add_windows("sknt_rolling_max");
  add_windows("relh_grad_rolling_max");
  add_windows("ts_flag_rolling_sum");
  add_windows("hr_flag_rolling_sum");
  add_windows("sq_flag_rolling_sum");
  for (const char* p :
       {"IDW_alti", "IDW_dwpf", "IDW_drct_u", "IDW_drct_v", "IDW_tmpf_lag_6h",
        "IDW_drct_v_lag_6h", "IDW_drct_u_lag_12h", "IDW_dwpf_lag_12h",
        "IDW_relh_rolling_mean_48h", "IDW_gust_rolling_max_24h",
        "IDW_sknt_rolling_max_48h", "IDW_ts_flag_rolling_sum_12h",
        "IDW_p01i_rolling_sum_24h"})
    names.push_back(p);
  names.push_back("day_of_week_num");
  names.push_back("population_density");
  names.push_back("x");
  names.push_back("y");
  names.push_back("county_encoded");
  return names;
}

// value at t = series(t - L); the first L entries are missing.
inline std::vector<double> make_lag(const std::vector<double>& series, int lag) {
  std::vector<double> out(series.size(), kMissing);
  for (std::size_t t = static_cast<std::size_t>(lag); t < series.size(); ++t)
    out[t] = series[t - static_cast<std::size_t>(lag)];
  return out;
}

enum class RollStat { mean, max, sum };

// Trailing window over (t-W, t]; emitted only when all W values are present.
inline std::vector<double> make_rolling(const std::vector<double>& series,
                                        int window, RollStat stat) {
  std::vector<double> out(series.size(), kMissing);
  std::size_t w = static_cast<std::size_t>(window);
  if (w == 0 || series.size() < w) return out;
  for (std::size_t t = w - 1; t < series.size(); ++t) {
    double acc = stat == RollStat::max
                     ? -std::numeric_limits<double>::infinity()
                     : 0.0;
    bool complete = true;
    for (std::size_t k = t + 1 - w; k <= t; ++k) {
      if (is_missing(series[k])) {
        complete = false;
        break;
      }
      if (stat == RollStat::max)
        acc = std::max(acc, series[k]);
      else
        acc += series[k];
    }
    if (!complete) continue;
    if (stat == RollStat::mean) acc /= static_cast<double>(w);
    out[t] = acc;
  }
  return out;
}

// Inverse-distance-weighted aggregate over the k nearest counties that have
// a value at this hour (self excluded). A coincident county short-circuits
// to its own value.
inline double idw_aggregate(const std::vector<double>& values,
                            const std::vector<Point2>& centroids,
                            std::size_t self, const IdwConfig& cfg) {
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (j == self || is_missing(values[j])) continue;
    candidates.emplace_back(dist(centroids[self], centroids[j]), j);
  }
  if (candidates.empty()) return kMissing;
  std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k),
                                        candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + k,
                    candidates.end());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto [d, j] = candidates[i];
    if (d == 0) return values[j];
    double w = std::pow(d, -cfg.power);
    num += w * values[j];
    den += w;
  }
  return num / den;
}

namespace detail {

struct EngineeredColumn {
  std::string name;
  std::vector<std::vector<double>> series;  // [county][hour]
};

// Builds every temporal/spatial column of the feature table from the county
// parameter series. Used by both the matrix builder and the causality tests.
inline std::vector<EngineeredColumn> engineer_columns(
    const CountySeries& cs, const std::vector<Point2>& centroids,
    const IdwConfig& idw_cfg) {
  std::size_t nc = cs.counties.size();
  std::map<std::string, std::vector<std::vector<double>>> built;
  auto get = [&](const std::string& name)
      -> const std::vector<std::vector<double>>& {
    auto it = built.find(name);
    if (it != built.end()) return it->second;
    return cs.param(name);
  };

  std::vector<EngineeredColumn> cols;
  auto push = [&](const std::string& name,
                  std::vector<std::vector<double>> series) {
    built[name] = series;
    cols.push_back({name, std::move(series)});
  };

  for (const char* raw : {"dwpf", "tmpf", "alti", "mslp", "gust", "p01i",
                          "sknt", "drct_u", "drct_v", "relh", "relh_grad",
                          "sq_flag", "ts_flag", "hr_flag"})
    push(raw, cs.param(raw));

  for (const char* base : {"dwpf", "tmpf", "drct_u", "drct_v"})
    for (int w : kWindows) {
      std::vector<std::vector<double>> s(nc);
      for (std::size_t c = 0; c < nc; ++c)
        s[c] = make_lag(cs.param(base)[c], w);
      push(std::string(base) + "_lag_" + std::to_string(w) + "h", std::move(s));
    }

  struct Roll {
    const char* base;
    const char* tag;
    RollStat stat;
  };
  for (const Roll& r : {Roll{"p01i", "sum", RollStat::sum},
                        Roll{"alti", "mean", RollStat::mean},
                        Roll{"mslp", "mean", RollStat::mean},
                        Roll{"relh", "mean", RollStat::mean},
                        Roll{"gust", "max", RollStat::max},
                        Roll{"sknt", "max", RollStat::max},
                        Roll{"relh_grad", "max", RollStat::max},
                        Roll{"ts_flag", "sum", RollStat::sum},
                        Roll{"hr_flag", "sum", RollStat::sum},
                        Roll{"sq_flag", "sum", RollStat::sum}})
    for (int w : kWindows) {
      std::vector<std::vector<double>> s(nc);
      for (std::size_t c = 0; c < nc; ++c)
        s[c] = make_rolling(cs.param(r.base)[c], w, r.stat);
      push(std::string(r.base) + "_rolling_" + r.tag + "_" +
               std::to_string(w) + "h",
           std::move(s));
    }

  for (const char* base :
       {"alti", "dwpf", "drct_u", "drct_v", "tmpf_lag_6h", "drct_v_lag_6h",
        "drct_u_lag_12h", "dwpf_lag_12h", "relh_rolling_mean_48h",
        "gust_rolling_max_24h", "sknt_rolling_max_48h",
        "ts_flag_rolling_sum_12h", "p01i_rolling_sum_24h"}) {
    const auto& src = get(base);
    std::vector<std::vector<double>> s(nc,
                                       std::vector<double>(cs.n_hours, kMissing));
    for (std::size_t h = 0; h < cs.n_hours; ++h) {
      std::vector<double> at_t(nc);
      for (std::size_t c = 0; c < nc; ++c) at_t[c] = src[c][h];
      for (std::size_t c = 0; c < nc; ++c)
        s[c][h] = idw_aggregate(at_t, centroids, c, idw_cfg);
    }
    push(std::string("IDW_") + base, std::move(s));
  }
  return cols;
}

}  // namespace detail

// Assembles the full hour-major feature matrix (without targets). Statics
// must cover every county in `cs`; the county encoding is the index of the
// id in sorted order, which is stable across runs.
inline FeatureMatrix build_feature_matrix(const CountySeries& cs,
                                          const std::vector<CountyStatic>& statics,
                                          const std::vector<Point2>& centroids,
                                          const IdwConfig& idw_cfg) {
  std::size_t nc = cs.counties.size();
  if (centroids.size() != nc)
    throw std::invalid_argument("centroid count does not match counties");

  std::map<std::string, const CountyStatic*> static_by_id;
  for (const auto& s : statics) static_by_id[s.county_id] = &s;
  std::vector<const CountyStatic*> county_static(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    auto it = static_by_id.find(cs.counties[c]);
    if (it == static_by_id.end())
      throw std::invalid_argument("no static data for county " + cs.counties[c]);
    county_static[c] = it->second;
  }
  std::vector<std::string> sorted_ids = cs.counties;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  std::vector<double> encoded(nc);
  for (std::size_t c = 0; c < nc; ++c)
    encoded[c] = static_cast<double>(
        std::lower_bound(sorted_ids.begin(), sorted_ids.end(), cs.counties[c]) -
        sorted_ids.begin());

  auto cols = detail::engineer_columns(cs, centroids, idw_cfg);

  FeatureMatrix m;
  m.feature_names = feature_table();
  m.counties = cs.counties;
  std::size_t n_rows = nc * cs.n_hours;
  m.county_index.resize(n_rows);
  m.hours.resize(n_rows);
  m.x.assign(n_rows * m.feature_names.size(), kMissing);
  m.flag48.assign(n_rows, kMissing);
  m.log_mag48.assign(n_rows, kMissing);

  std::size_t nf = m.feature_names.size();
  for (std::size_t h = 0; h < cs.n_hours; ++h)
    for (std::size_t c = 0; c < nc; ++c) {
      std::size_t r = h * nc + c;
      m.county_index[r] = static_cast<int>(c);
      m.hours[r] = cs.start_hour + static_cast<std::int64_t>(h);
    }

  for (std::size_t f = 0; f < cols.size(); ++f)
    for (std::size_t h = 0; h < cs.n_hours; ++h)
      for (std::size_t c = 0; c < nc; ++c)
        m.x[(h * nc + c) * nf + f] = cols[f].series[c][h];

  std::size_t f_dow = cols.size(), f_pop = f_dow + 1, f_x = f_dow + 2,
              f_y = f_dow + 3, f_enc = f_dow + 4;
  for (std::size_t h = 0; h < cs.n_hours; ++h) {
    double dow = day_of_week(cs.start_hour + static_cast<std::int64_t>(h));
    for (std::size_t c = 0; c < nc; ++c) {
      std::size_t r = h * nc + c;
      m.x[r * nf + f_dow] = dow;
      m.x[r * nf + f_pop] =
          county_static[c]->population / county_static[c]->area_km2;
      m.x[r * nf + f_x] = county_static[c]->lon;
      m.x[r * nf + f_y] = county_static[c]->lat;
      m.x[r * nf + f_enc] = encoded[c];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

struct TargetParams {
  // Per county: train-split min/max of the outage series and the 90th
  // percentile threshold on the normalized scale. Degenerate counties
  // (constant train series) fall back to flagging any nonzero outage.
  std::vector<double> train_min, train_max, threshold;
  std::vector<bool> degenerate;
};

struct Targets {
  std::vector<std::vector<double>> flag48;     // [county][hour], 0/1/NaN
  std::vector<std::vector<double>> log_mag48;  // [county][hour]
  TargetParams params;
};

// Anomaly flag and log1p magnitude at t+horizon, normalization and the
// percentile threshold fit on the training span only.
inline Targets build_targets(const ingest::OutageHourlyGrid& grid,
                             int horizon, std::size_t train_begin,
                             std::size_t train_end, double pct = 0.90) {
  std::size_t nc = grid.counties.size();
  std::size_t nh = grid.n_hours();
  if (train_end > nh || train_begin >= train_end)
    throw std::invalid_argument("train span outside grid");
  Targets t;
  t.flag48.assign(nc, std::vector<double>(nh, kMissing));
  t.log_mag48.assign(nc, std::vector<double>(nh, kMissing));
  t.params.train_min.assign(nc, kMissing);
  t.params.train_max.assign(nc, kMissing);
  t.params.threshold.assign(nc, 0.0);
  t.params.degenerate.assign(nc, false);

  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> train_vals;
    for (std::size_t h = train_begin; h < train_end; ++h)
      if (!is_missing(grid.values[c][h])) train_vals.push_back(grid.values[c][h]);
    double lo = kMissing, hi = kMissing;
    for (double v : train_vals) {
      if (is_missing(lo) || v < lo) lo = v;
      if (is_missing(hi) || v > hi) hi = v;
    }
    bool degenerate = train_vals.empty() || lo == hi;
    t.params.train_min[c] = lo;
    t.params.train_max[c] = hi;
    t.params.degenerate[c] = degenerate;
    if (!degenerate) {
      std::vector<double> norm;
      norm.reserve(train_vals.size());
      for (double v : train_vals) norm.push_back((v - lo) / (hi - lo));
      t.params.threshold[c] = quantile(std::move(norm), pct);
    }

    for (std::size_t h = 0; h + static_cast<std::size_t>(horizon) < nh; ++h) {
      double y = grid.values[c][h + static_cast<std::size_t>(horizon)];
      if (is_missing(y)) continue;
      t.log_mag48[c][h] = std::log1p(y);
      if (degenerate) {
        t.flag48[c][h] = y > 0 ? 1.0 : 0.0;
      } else {
        double yn = (y - lo) / (hi - lo);
        t.flag48[c][h] = yn >= t.params.threshold[c] ? 1.0 : 0.0;
      }
    }
  }
  return t;
}

inline void attach_targets(FeatureMatrix& m, const Targets& t,
                           std::int64_t grid_start_hour) {
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    std::int64_t h = m.hours[r] - grid_start_hour;
    std::size_t c = static_cast<std::size_t>(m.county_index[r]);
    if (h < 0 || h >= static_cast<std::int64_t>(t.flag48[c].size())) continue;
    m.flag48[r] = t.flag48[c][static_cast<std::size_t>(h)];
    m.log_mag48[r] = t.log_mag48[c][static_cast<std::size_t>(h)];
  }
}

// ---------------------------------------------------------------------------
// Event-window undersampling
// ---------------------------------------------------------------------------

// Keeps every positive, every negative inside a qualifying +/-window around
// anomaly clusters (>= min_anoms positives inside the window), and a seeded
// fraction of the remaining negatives.
inline std::vector<bool> undersample_event_windows(
    const std::vector<int>& county_index, const std::vector<std::int64_t>& hours,
    const std::vector<double>& flags, int window, int min_anoms,
    double neg_keep, std::uint64_t seed) {
  std::size_t n = flags.size();
  // Positive hours per county.
  std::map<int, std::vector<std::int64_t>> positives;
  for (std::size_t r = 0; r < n; ++r)
    if (!is_missing(flags[r]) && flags[r] != 0.0)
      positives[county_index[r]].push_back(hours[r]);
  for (auto& [c, hs] : positives) std::sort(hs.begin(), hs.end());

  // Qualifying windows per county, as merged [lo, hi] hour intervals.
  std::map<int, std::vector<std::pair<std::int64_t, std::int64_t>>> windows;
  for (auto& [c, hs] : positives) {
    for (std::size_t i = 0; i < hs.size(); ++i) {
      std::int64_t lo = hs[i] - window, hi = hs[i] + window;
      auto begin = std::lower_bound(hs.begin(), hs.end(), lo);
      auto end = std::upper_bound(hs.begin(), hs.end(), hi);
      if (end - begin >= min_anoms) windows[c].emplace_back(lo, hi);
    }
    auto& w = windows[c];
    std::sort(w.begin(), w.end());
    std::vector<std::pair<std::int64_t, std::int64_t>> merged;
    for (auto& iv : w) {
      if (!merged.empty() && iv.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, iv.second);
      else
        merged.push_back(iv);
    }
    w = std::move(merged);
  }
  auto in_window = [&](int c, std::int64_t h) {
    auto it = windows.find(c);
    if (it == windows.end()) return false;
    for (auto& [lo, hi] : it->second)
      if (h >= lo && h <= hi) return true;
    return false;
  };

  Rng rng(seed);
  std::vector<bool> keep(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    bool positive = !is_missing(flags[r]) && flags[r] != 0.0;
    if (positive) {
      keep[r] = true;
    } else if (in_window(county_index[r], hours[r])) {
      keep[r] = true;
    } else {
      keep[r] = neg_keep >= 1.0 || rng.bernoulli(neg_keep);
    }
  }
  return keep;
}

// Negative-keep fraction that makes the expected positive share of the kept
// subset equal `target_share`.
inline double tune_neg_keep(const std::vector<bool>& positive,
                            const std::vector<bool>& in_window,
                            double target_share) {
  double p = 0, n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    if (positive[i])
      ++p;
    else if (in_window[i])
      ++n_in;
    else
      ++n_out;
  }
  if (p == 0 || n_out == 0 || target_share <= 0) return 1.0;
  double q = (p / target_share - p - n_in) / n_out;
  return std::clamp(q, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Scaling and screening
// ---------------------------------------------------------------------------

struct ScalerParams {
  std::vector<double> min, max;
};

inline ScalerParams fit_scaler(const FeatureMatrix& m,
                               const std::vector<bool>& train_rows) {
  std::size_t nf = m.n_features();
  ScalerParams p;
  p.min.assign(nf, kMissing);
  p.max.assign(nf, kMissing);
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    if (!train_rows[r]) continue;
    for (std::size_t f = 0; f < nf; ++f) {
      double v = m.at(r, f);
      if (is_missing(v)) continue;
      if (is_missing(p.min[f]) || v < p.min[f]) p.min[f] = v;
      if (is_missing(p.max[f]) || v > p.max[f]) p.max[f] = v;
    }
  }
  return p;
}

inline double scale_value(double v, double lo, double hi) {
  if (is_missing(v)) return v;
  if (is_missing(lo) || is_missing(hi) || hi == lo) return 0.0;
  return (v - lo) / (hi - lo);  // deliberately unclamped outside the train range
}

inline void apply_scaler(FeatureMatrix& m, const ScalerParams& p) {
  std::size_t nf = m.n_features();
  for (std::size_t r = 0; r < m.n_rows(); ++r)
    for (std::size_t f = 0; f < nf; ++f)
      m.at(r, f) = scale_value(m.at(r, f), p.min[f], p.max[f]);
}

struct RankedFeature {
  std::string name;
  double r = 0;
  bool degenerate = false;
};

// |Pearson r| ranking of every feature against a target column, computed on
// the selected rows; ties keep table order.
inline std::vector<RankedFeature> pearson_rank(
    const FeatureMatrix& m, const std::vector<double>& target,
    const std::vector<bool>& rows) {
  std::size_t nf = m.n_features();
  std::vector<RankedFeature> out(nf);
  std::vector<double> fv, tv;
  for (std::size_t f = 0; f < nf; ++f) {
    fv.clear();
    tv.clear();
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
      if (!rows[r]) continue;
      fv.push_back(m.at(r, f));
      tv.push_back(target[r]);
    }
    bool degenerate = false;
    double corr = pearson(fv, tv, &degenerate);
    out[f] = {m.feature_names[f], degenerate ? 0.0 : corr, degenerate};
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedFeature& a, const RankedFeature& b) {
                     return std::abs(a.r) > std::abs(b.r);
                   });
  return out;
}

// Greedy collinearity screen: walk features in descending |r| against
// log_mag48 and drop any candidate whose |pairwise r| with an already
// retained feature exceeds r_max.
inline std::vector<std::string> collinearity_screen(const FeatureMatrix& m,
                                                    const std::vector<bool>& rows,
                                                    double r_max = 0.95) {
  auto ranked = pearson_rank(m, m.log_mag48, rows);
  std::vector<std::string> retained;
  std::vector<std::vector<double>> retained_vals;

  std::vector<double> cand;
  for (const auto& rf : ranked) {
    int f = m.feature(rf.name);
    cand.clear();
    for (std::size_t r = 0; r < m.n_rows(); ++r)
      cand.push_back(rows[r] ? m.at(r, static_cast<std::size_t>(f)) : kMissing);
    bool ok = true;
    for (const auto& rv : retained_vals) {
      double pr = pearson(cand, rv);
      if (std::abs(pr) > r_max) {
        ok = false;
        break;
      }
    }
    if (ok) {
      retained.push_back(rf.name);
      retained_vals.push_back(cand);
    }
  }
  return retained;
}

}  // namespace stormcast::features
