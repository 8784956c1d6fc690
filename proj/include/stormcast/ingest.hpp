#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/csv.hpp"
#include "stormcast/geo.hpp"

namespace stormcast::ingest {

inline constexpr double kKnotsToMs = 0.514444;

struct OutageRecord {
  std::string county_id;
  std::int64_t timestamp = 0;  // UTC seconds, on a 15-minute grid
  double customers_out = 0;
};

// County x 15-minute-tick matrix. Ticks are contiguous from start_tick
// (units of 900 s since epoch).
struct OutageQuarterGrid {
  std::vector<std::string> counties;
  std::int64_t start_tick = 0;
  std::vector<std::vector<double>> values;  // [county][tick], NaN = missing

  std::size_t n_ticks() const { return counties.empty() ? 0 : values[0].size(); }
};

// County x hour matrix with a contiguous hour axis.
struct OutageHourlyGrid {
  std::vector<std::string> counties;
  std::int64_t start_hour = 0;
  std::vector<std::vector<double>> values;  // [county][hour], NaN = missing

  std::size_t n_hours() const { return counties.empty() ? 0 : values[0].size(); }

  std::vector<double> state_total() const {
    std::vector<double> total(n_hours(), kMissing);
    for (std::size_t h = 0; h < n_hours(); ++h) {
      double s = 0;
      bool any = false;
      for (const auto& county : values)
        if (!is_missing(county[h])) {
          s += county[h];
          any = true;
        }
      if (any) total[h] = s;
    }
    return total;
  }
};

struct RawWeatherRecord {
  std::string station_id;
  std::int64_t timestamp = 0;
  double tmpf = kMissing;
  double dwpf = kMissing;
  double relh = kMissing;
  double drct = kMissing;
  double sknt = kMissing;
  double p01i = kMissing;
  double alti = kMissing;
  double mslp = kMissing;
  double gust = kMissing;
  bool ts_flag = false;
  bool sq_flag = false;
  bool hr_flag = false;
};

struct StationHourly {
  std::string station_id;
  std::int64_t hour = 0;
  double tmpf = kMissing;
  double dwpf = kMissing;
  double relh = kMissing;
  double drct = kMissing;
  double sknt = kMissing;
  double p01i = kMissing;
  double alti = kMissing;
  double mslp = kMissing;
  double gust = kMissing;
  double u = kMissing;  // m/s, from within-hour max wind speed
  double v = kMissing;
  bool ts_flag = false;
  bool sq_flag = false;
  bool hr_flag = false;
};

struct StationMeta {
  std::string station_id;
  double lon = 0;
  double lat = 0;
  double x = 0;  // projected meters
  double y = 0;
};

struct GapFill {
  std::vector<double> values;
  std::vector<bool> long_gap;  // hours left missing because the run exceeded max_gap
};

// Linear interpolation across interior missing runs of length <= max_gap.
// Longer runs (and leading/trailing runs, which have no bracket) stay
// missing and are flagged.
inline GapFill fill_short_gaps(const std::vector<double>& series,
                               int max_gap = 4) {
  GapFill out{series, std::vector<bool>(series.size(), false)};
  std::size_t n = series.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_missing(series[i])) {
      ++i;
      continue;
    }
    std::size_t run_start = i;
    while (i < n && is_missing(series[i])) ++i;
    std::size_t run_end = i;  // one past
    bool has_left = run_start > 0;
    bool has_right = run_end < n;
    std::size_t run_len = run_end - run_start;
    if (has_left && has_right && run_len <= static_cast<std::size_t>(max_gap)) {
      double lo = series[run_start - 1];
      double hi = series[run_end];
      double step = (hi - lo) / static_cast<double>(run_len + 1);
      for (std::size_t k = 0; k < run_len; ++k)
        out.values[run_start + k] = lo + step * static_cast<double>(k + 1);
    } else {
      for (std::size_t k = run_start; k < run_end; ++k) out.long_gap[k] = true;
    }
  }
  return out;
}

// Builds the county x tick matrix from raw records. Rejects negative counts
// and timestamps off the 15-minute grid.
inline OutageQuarterGrid build_quarter_grid(
    const std::vector<OutageRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no outage records");
  std::int64_t lo = records.front().timestamp, hi = lo;
  std::map<std::string, std::size_t> county_index;
  for (const auto& r : records) {
    if (r.customers_out < 0)
      throw std::invalid_argument("negative customers_out for " + r.county_id);
    if (r.timestamp % 900 != 0)
      throw std::invalid_argument("timestamp off 15-minute grid: " +
                                  format_utc(r.timestamp));
    lo = std::min(lo, r.timestamp);
    hi = std::max(hi, r.timestamp);
    county_index.emplace(r.county_id, 0);
  }
  OutageQuarterGrid g;
  for (auto& [id, idx] : county_index) {
    idx = g.counties.size();
    g.counties.push_back(id);
  }
  g.start_tick = lo / 900;
  std::size_t n_ticks = static_cast<std::size_t>(hi / 900 - g.start_tick) + 1;
  g.values.assign(g.counties.size(), std::vector<double>(n_ticks, kMissing));
  for (const auto& r : records) {
    std::size_t c = county_index[r.county_id];
    std::size_t t = static_cast<std::size_t>(r.timestamp / 900 - g.start_tick);
    g.values[c][t] = r.customers_out;
  }
  return g;
}

// Hourly 'max-concurrency' aggregation: within each hour, take every county's
// value at the single 15-minute tick where the statewide sum is maximal
// (earliest tick on ties). Hours whose ticks are all missing stay missing.
inline OutageHourlyGrid aggregate_max_concurrency(const OutageQuarterGrid& q) {
  OutageHourlyGrid g;
  g.counties = q.counties;
  // Cover whole hours; partial leading/trailing hours use the ticks present.
  std::int64_t first_hour = q.start_tick / 4;
  std::int64_t last_tick = q.start_tick + static_cast<std::int64_t>(q.n_ticks()) - 1;
  std::int64_t last_hour = last_tick / 4;
  g.start_hour = first_hour;
  std::size_t n_hours = static_cast<std::size_t>(last_hour - first_hour) + 1;
  g.values.assign(g.counties.size(), std::vector<double>(n_hours, kMissing));
  for (std::size_t h = 0; h < n_hours; ++h) {
    int best_tick = -1;
    double best_total = -1;
    for (int k = 0; k < 4; ++k) {
      std::int64_t tick = (first_hour + static_cast<std::int64_t>(h)) * 4 + k;
      if (tick < q.start_tick || tick > last_tick) continue;
      std::size_t t = static_cast<std::size_t>(tick - q.start_tick);
      double total = 0;
      bool any = false;
      for (const auto& county : q.values)
        if (!is_missing(county[t])) {
          total += county[t];
          any = true;
        }
      if (any && total > best_total) {
        best_total = total;
        best_tick = static_cast<int>(t);
      }
    }
    if (best_tick < 0) continue;  // hour entirely missing
    for (std::size_t c = 0; c < g.counties.size(); ++c)
      g.values[c][h] = q.values[c][best_tick];
  }
  return g;
}

// kt + meteorological degrees -> (u, v) in m/s.
inline void decompose_wind(double speed_kt, double dir_deg, double& u,
                           double& v) {
  double ms = speed_kt * kKnotsToMs;
  double rad = dir_deg * 0.017453292519943295;
  u = -ms * std::sin(rad);
  v = -ms * std::cos(rad);
}

// Inverse of decompose_wind; direction 0 by convention for calm air.
inline void recover_wind(double u, double v, double& speed_ms,
                         double& dir_deg) {
  speed_ms = std::sqrt(u * u + v * v);
  if (speed_ms == 0) {
    dir_deg = 0;
    return;
  }
  double deg = std::atan2(-u, -v) * 57.29577951308232;
  dir_deg = std::fmod(deg + 360.0, 360.0);
}

namespace detail {

inline double mean_present(const std::vector<double>& v) {
  double s = 0;
  std::size_t n = 0;
  for (double x : v)
    if (!is_missing(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : kMissing;
}

inline double max_present(const std::vector<double>& v) {
  double m = kMissing;
  for (double x : v)
    if (!is_missing(x) && (is_missing(m) || x > m)) m = x;
  return m;
}

inline void forward_fill(std::vector<double>& v, int max_hours) {
  int since = max_hours + 1;
  double last = kMissing;
  for (auto& x : v) {
    if (!is_missing(x)) {
      last = x;
      since = 0;
    } else {
      ++since;
      if (!is_missing(last) && since <= max_hours) x = last;
    }
  }
}

}  // namespace detail

// Hourly aggregation for one station over [start_hour, start_hour + n_hours).
// Records must belong to this station. Aggregation rules per parameter:
// temperature/dew point/humidity/pressure = mean; wind speed = max and the
// direction is taken at the record of that maximum; precipitation = max with
// 0 when nothing reported; gust = max and stays missing when absent; flags
// latch on any occurrence. Afterwards a 2-hour forward fill is applied per
// parameter, except gust and flags. Wind components come from the filled
// speed/direction pair.
inline std::vector<StationHourly> resample_station_hourly(
    const std::string& station_id, const std::vector<RawWeatherRecord>& records,
    std::int64_t start_hour, std::size_t n_hours) {
  struct Bucket {
    std::vector<double> tmpf, dwpf, relh, alti, mslp, p01i, gust;
    double max_sknt = kMissing;
    double drct_at_max = kMissing;
    bool ts = false, sq = false, hr = false;
  };
  std::vector<Bucket> buckets(n_hours);
  for (const auto& r : records) {
    std::int64_t h = hour_of(r.timestamp) - start_hour;
    if (h < 0 || h >= static_cast<std::int64_t>(n_hours)) continue;
    Bucket& b = buckets[static_cast<std::size_t>(h)];
    b.tmpf.push_back(r.tmpf);
    b.dwpf.push_back(r.dwpf);
    b.relh.push_back(r.relh);
    b.alti.push_back(r.alti);
    b.mslp.push_back(r.mslp);
    b.p01i.push_back(r.p01i);
    b.gust.push_back(r.gust);
    if (!is_missing(r.sknt) &&
        (is_missing(b.max_sknt) || r.sknt > b.max_sknt)) {
      b.max_sknt = r.sknt;
      b.drct_at_max = r.drct;
    }
    b.ts = b.ts || r.ts_flag;
    b.sq = b.sq || r.sq_flag;
    b.hr = b.hr || r.hr_flag;
  }

  std::vector<double> tmpf(n_hours), dwpf(n_hours), relh(n_hours),
      alti(n_hours), mslp(n_hours), sknt(n_hours), drct(n_hours),
      p01i(n_hours), gust(n_hours);
  std::vector<StationHourly> out(n_hours);
  for (std::size_t h = 0; h < n_hours; ++h) {
    const Bucket& b = buckets[h];
    tmpf[h] = detail::mean_present(b.tmpf);
    dwpf[h] = detail::mean_present(b.dwpf);
    relh[h] = detail::mean_present(b.relh);
    alti[h] = detail::mean_present(b.alti);
    mslp[h] = detail::mean_present(b.mslp);
    sknt[h] = b.max_sknt;
    drct[h] = b.drct_at_max;
    double pmax = detail::max_present(b.p01i);
    p01i[h] = is_missing(pmax) ? 0.0 : pmax;  // absent precip means none
    gust[h] = detail::max_present(b.gust);
    out[h].ts_flag = b.ts;
    out[h].sq_flag = b.sq;
    out[h].hr_flag = b.hr;
  }
  for (auto* p : {&tmpf, &dwpf, &relh, &alti, &mslp, &sknt, &drct})
    detail::forward_fill(*p, 2);

  for (std::size_t h = 0; h < n_hours; ++h) {
    StationHourly& s = out[h];
    s.station_id = station_id;
    s.hour = start_hour + static_cast<std::int64_t>(h);
    s.tmpf = tmpf[h];
    s.dwpf = dwpf[h];
    s.relh = relh[h];
    s.alti = alti[h];
    s.mslp = mslp[h];
    s.sknt = sknt[h];
    s.drct = drct[h];
    s.p01i = p01i[h];
    s.gust = gust[h];
    if (!is_missing(s.sknt) && !is_missing(s.drct))
      decompose_wind(s.sknt, s.drct, s.u, s.v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV loaders for the documented input schemas.
// ---------------------------------------------------------------------------

inline std::vector<OutageRecord> load_outage_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_id = t.column("county_id"), c_ts = t.column("timestamp_utc"),
      c_out = t.column("customers_out");
  if (c_id < 0 || c_ts < 0 || c_out < 0)
    throw std::runtime_error(path + ": expected county_id,timestamp_utc,customers_out");
  std::vector<OutageRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    OutageRecord r;
    r.county_id = row[c_id];
    r.timestamp = parse_utc_or_throw(row[c_ts]);
    r.customers_out = parse_cell(row[c_out]);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RawWeatherRecord> load_weather_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  auto col = [&](const char* n) {
    int c = t.column(n);
    if (c < 0) throw std::runtime_error(path + ": missing column " + n);
    return c;
  };
  int c_id = col("station_id"), c_ts = col("timestamp_utc"),
      c_tmpf = col("tmpf"), c_dwpf = col("dwpf"), c_relh = col("relh"),
      c_drct = col("drct"), c_sknt = col("sknt"), c_p01i = col("p01i"),
      c_alti = col("alti"), c_mslp = col("mslp"), c_gust = col("gust"),
      c_wx = col("wxcodes");
  std::vector<RawWeatherRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    RawWeatherRecord r;
    r.station_id = row[c_id];
    r.timestamp = parse_utc_or_throw(row[c_ts]);
    r.tmpf = parse_cell(row[c_tmpf]);
    r.dwpf = parse_cell(row[c_dwpf]);
    r.relh = parse_cell(row[c_relh]);
    r.drct = parse_cell(row[c_drct]);
    r.sknt = parse_cell(row[c_sknt]);
    r.p01i = parse_cell(row[c_p01i]);
    r.alti = parse_cell(row[c_alti]);
    r.mslp = parse_cell(row[c_mslp]);
    r.gust = parse_cell(row[c_gust]);
    const std::string& wx = row[c_wx];
    r.ts_flag = wx.find("TS") != std::string::npos;
    r.sq_flag = wx.find("SQ") != std::string::npos;
    r.hr_flag = wx.find("HR") != std::string::npos;
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<StationMeta> load_stations_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_id = t.column("station_id"), c_lon = t.column("lon"),
      c_lat = t.column("lat");
  if (c_id < 0 || c_lon < 0 || c_lat < 0)
    throw std::runtime_error(path + ": expected station_id,lon,lat");
  std::vector<StationMeta> out;
  for (const auto& row : t.rows) {
    StationMeta m;
    m.station_id = row[c_id];
    m.lon = parse_cell(row[c_lon]);
    m.lat = parse_cell(row[c_lat]);
    out.push_back(std::move(m));
  }
  return out;
}

// Fills projected coordinates for a station list with a shared projection.
inline void project_stations(std::vector<StationMeta>& stations,
                             const LocalProjection& proj) {
  for (auto& s : stations) {
    Point2 p = proj.to_xy(s.lon, s.lat);
    s.x = p.x;
    s.y = p.y;
  }
}

}  // namespace stormcast::ingest
