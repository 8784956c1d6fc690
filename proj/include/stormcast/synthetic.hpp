#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "stormcast/config.hpp"
#include "stormcast/core.hpp"
#include "stormcast/csv.hpp"

namespace stormcast::synth {

// Deterministic two-season synthetic dataset: a jittered county lattice, a
// south-heavy station network, zero-inflated background outages, and
// `storm_count` convective episodes per season. Each storm writes a dew
// point ramp, pressure drop and gust spike into the station weather at hour
// t and a multi-county outage surge at t+48 whose state-level plateau
// clears the peak threshold. Same spec => byte-identical files.
struct SyntheticSpec {
  int n_counties = 36;
  int n_stations = 28;
  int season_hours = 2208;  // per season; test season follows train directly
  int storm_count = 4;      // per season
  double storm_peak = 82000.0;
  double peak_jitter = 0.25;    // relative intensity spread across storms
  double background_burst_rate = 0.01;
  std::uint64_t seed = 42;
  std::string train_begin = "2021-06-01T00:00:00Z";

  std::int64_t train_begin_hour() const {
    return hour_of(parse_utc_or_throw(train_begin));
  }
  std::int64_t test_begin_hour() const {
    return train_begin_hour() + season_hours;
  }
  std::int64_t total_hours() const { return 2 * season_hours; }
};

namespace detail {

struct County {
  std::string id;
  double lon, lat;
  double population, area_km2;
  int row, col;
};

struct Station {
  std::string id;
  double lon, lat;
};

struct Storm {
  std::int64_t peak_hour;   // absolute hour of the weather signature peak
  double intensity;         // target state-level outage peak (customers)
  double center_lon, center_lat;
};

inline constexpr double kLonMin = -86.6, kLonMax = -82.6;
inline constexpr double kLatMin = 41.7, kLatMax = 45.7;

inline double km_between(double lon1, double lat1, double lon2, double lat2) {
  double mlat = 0.5 * (lat1 + lat2) * 0.017453292519943295;
  double dx = (lon1 - lon2) * 111.32 * std::cos(mlat);
  double dy = (lat1 - lat2) * 111.32;
  return std::sqrt(dx * dx + dy * dy);
}

inline std::vector<County> make_counties(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, 1));
  int rows = static_cast<int>(std::ceil(std::sqrt(spec.n_counties)));
  int cols = (spec.n_counties + rows - 1) / rows;
  double dlon = (kLonMax - kLonMin) / cols;
  double dlat = (kLatMax - kLatMin) / rows;
  std::vector<County> out;
  for (int k = 0; k < spec.n_counties; ++k) {
    int r = k / cols, c = k % cols;
    County county;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "C%03d", k + 1);
    county.id = buf;
    county.row = r;
    county.col = c;
    county.lon = kLonMin + (c + 0.5) * dlon + rng.uniform(-0.18, 0.18) * dlon;
    county.lat = kLatMin + (r + 0.5) * dlat + rng.uniform(-0.18, 0.18) * dlat;
    double latnorm = (county.lat - kLatMin) / (kLatMax - kLatMin);
    double base = 420000.0 * std::exp(-2.0 * latnorm);
    county.population =
        std::round(base * std::exp(rng.normal(0.0, 0.45)) + 8000.0);
    county.area_km2 = std::round(dlon * 111.32 * std::cos(county.lat *
                                                          0.01745329) *
                                 dlat * 111.32 * rng.uniform(0.85, 1.15));
    out.push_back(county);
  }
  return out;
}

inline std::vector<Station> make_stations(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, 2));
  std::vector<Station> out;
  for (int k = 0; k < spec.n_stations; ++k) {
    Station s;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%02d", k + 1);
    s.id = buf;
    s.lon = rng.uniform(kLonMin + 0.1, kLonMax - 0.1);
    // Density decays northward (sqrt transform of a uniform draw).
    double u = rng.uniform();
    s.lat = kLatMin + (kLatMax - kLatMin) * (1.0 - std::sqrt(u)) * 0.96 + 0.05;
    out.push_back(s);
  }
  return out;
}

inline std::vector<Storm> make_storms(const SyntheticSpec& spec,
                                      std::int64_t season_start, int season_tag,
                                      const std::vector<County>& counties) {
  Rng rng(derive_seed(spec.seed, 100 + static_cast<std::uint64_t>(season_tag)));
  std::vector<Storm> out;
  if (spec.storm_count <= 0) return out;
  // Margins keep the weather signature, its +48 h outage response and the
  // +/-48 h evaluation windows inside the season.
  int margin = 160;
  double spacing = static_cast<double>(spec.season_hours - 2 * margin) /
                   spec.storm_count;
  for (int s = 0; s < spec.storm_count; ++s) {
    Storm storm;
    storm.peak_hour = season_start + margin +
                      static_cast<std::int64_t>(std::llround(
                          (s + 0.5) * spacing + rng.uniform(-12.0, 12.0)));
    storm.intensity =
        spec.storm_peak *
        (1.0 + spec.peak_jitter * (2.0 * rng.uniform() - 1.0));
    const County& center =
        counties[rng.uniform_index(counties.size())];
    storm.center_lon = center.lon + rng.uniform(-0.2, 0.2);
    storm.center_lat = center.lat + rng.uniform(-0.2, 0.2);
    out.push_back(storm);
  }
  return out;
}

// Smooth storm activation in time: gaussian rise into the peak hour with a
// short tail after it.
inline double storm_time_bump(std::int64_t t, std::int64_t peak) {
  double x = static_cast<double>(t - peak);
  if (x < -20 || x > 8) return 0.0;
  double width = x <= 0 ? 7.0 : 4.0;
  return std::exp(-(x * x) / (width * width));
}

// Flat-topped outage response profile centered on peak+48.
inline double outage_shape(std::int64_t t, std::int64_t response_peak) {
  double x = static_cast<double>(t - response_peak);
  if (x < -12 || x > 12) return 0.0;
  double r = x / 5.4;
  return std::exp(-(r * r) * (r * r));
}

inline double ar1_next(double prev, double phi, double sigma, Rng& rng) {
  return phi * prev + sigma * rng.normal();
}

}  // namespace detail

struct SyntheticFiles {
  std::string outages, weather, stations, statics, adjacency, external_events;
};

inline SyntheticFiles file_names(const std::string& out_dir) {
  namespace fs = std::filesystem;
  auto p = [&](const char* n) { return (fs::path(out_dir) / n).string(); };
  return {p("outages.csv"), p("weather.csv"),        p("stations.csv"),
          p("statics.csv"), p("adjacency.csv"),      p("external_events.csv")};
}

inline void generate_synthetic(const SyntheticSpec& spec,
                               const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  SyntheticFiles files = file_names(out_dir);

  auto counties = detail::make_counties(spec);
  auto stations = detail::make_stations(spec);
  std::int64_t start_hour = spec.train_begin_hour();
  std::int64_t n_hours = spec.total_hours();

  std::vector<detail::Storm> storms;
  for (int season = 0; season < 2; ++season) {
    auto s = detail::make_storms(
        spec, start_hour + season * spec.season_hours, season, counties);
    storms.insert(storms.end(), s.begin(), s.end());
  }

  // --- station weather ---------------------------------------------------
  {
    CsvWriter w(files.weather);
    w.row({"station_id", "timestamp_utc", "tmpf", "dwpf", "relh", "drct",
           "sknt", "p01i", "alti", "mslp", "gust", "wxcodes"});
    for (std::size_t si = 0; si < stations.size(); ++si) {
      const auto& st = stations[si];
      Rng rng(derive_seed(spec.seed, 1000 + si));
      double latnorm = (st.lat - detail::kLatMin) /
                       (detail::kLatMax - detail::kLatMin);
      double t_noise = 0, spread_noise = 0, p_noise = 0, wind_noise = 0;
      double dir_phase = rng.uniform(0.0, 6.28318);
      for (std::int64_t k = 0; k < n_hours; ++k) {
        std::int64_t hour = start_hour + k;
        t_noise = detail::ar1_next(t_noise, 0.95, 0.9, rng);
        spread_noise = detail::ar1_next(spread_noise, 0.9, 0.7, rng);
        p_noise = detail::ar1_next(p_noise, 0.995, 0.012, rng);
        wind_noise = detail::ar1_next(wind_noise, 0.9, 1.3, rng);

        double diurnal = std::sin(6.28318 * ((hour % 24) / 24.0) - 2.3);
        double seasonal =
            std::sin(6.28318 * static_cast<double>(k % spec.season_hours) /
                     spec.season_hours);
        double storm_w = 0;
        for (const auto& storm : storms) {
          double b = detail::storm_time_bump(hour, storm.peak_hour);
          if (b <= 0) continue;
          double d = detail::km_between(st.lon, st.lat, storm.center_lon,
                                        storm.center_lat);
          storm_w = std::max(storm_w, b * std::exp(-(d * d) / (140.0 * 140.0)));
        }

        double tmpf = 71.0 - 7.5 * latnorm + 8.5 * diurnal + 4.0 * seasonal +
                      t_noise + 2.0 * storm_w;
        double spread = std::max(1.0, 10.5 + spread_noise - 13.0 * storm_w);
        double dwpf = tmpf - spread;
        double relh =
            std::clamp(100.0 - 4.1 * spread + rng.normal(0.0, 1.2), 12.0, 100.0);
        double alti = 29.96 + p_noise - 0.30 * storm_w;
        double mslp = 1013.2 + (alti - 29.96) * 33.86 + rng.normal(0.0, 0.4);
        double sknt =
            std::max(0.0, 6.0 + wind_noise + 16.0 * storm_w + rng.normal(0, 0.6));
        double drct = std::fmod(
            190.0 + 70.0 * std::sin(6.28318 * k / 260.0 + dir_phase) +
                rng.normal(0.0, 9.0) + 720.0,
            360.0);
        double gust = kMissing;
        if (storm_w > 0.25 || sknt > 13.5)
          gust = sknt * (1.35 + 0.45 * storm_w) + rng.uniform(0.0, 2.0);
        double p01i = 0.0;
        if (storm_w > 0.2) p01i = 0.45 * storm_w + rng.uniform(0.0, 0.08);
        else if (rng.bernoulli(0.025)) p01i = rng.uniform(0.01, 0.12);

        std::string wx;
        bool ts = storm_w > 0.3 && rng.bernoulli(0.9);
        bool hr = p01i > 0.30;
        bool sq = !is_missing(gust) && gust > 30.0;
        if (ts) wx = "TS";
        if (hr) wx += (wx.empty() ? "" : "|") + std::string("HR");
        if (sq) wx += (wx.empty() ? "" : "|") + std::string("SQ");

        // Observation dropouts exercise the forward-fill path.
        if (rng.bernoulli(0.01)) continue;
        auto cell = [&](double v, double miss_p) {
          return rng.bernoulli(miss_p) ? std::string() : format_cell(v);
        };
        w.row({st.id, format_utc(hour * 3600),
               cell(tmpf, 0.015), cell(dwpf, 0.015), cell(relh, 0.02),
               cell(drct, 0.02), cell(sknt, 0.015), format_cell(p01i),
               cell(alti, 0.02), cell(mslp, 0.30),
               is_missing(gust) ? std::string() : format_cell(gust), wx});
        // A second sub-hourly report for a third of the hours.
        if (rng.bernoulli(0.33))
          w.row({st.id, format_utc(hour * 3600 + 1800),
                 cell(tmpf + rng.normal(0.0, 0.4), 0.1),
                 cell(dwpf + rng.normal(0.0, 0.4), 0.1), "", "",
                 cell(std::max(0.0, sknt + rng.normal(0.0, 0.8)), 0.1),
                 format_cell(p01i), "", "", "", wx});
      }
    }
  }

  // --- outages (15-minute grid) -------------------------------------------
  std::vector<std::vector<double>> county_hourly(
      counties.size(), std::vector<double>(static_cast<std::size_t>(n_hours), 0));
  {
    // Storm response shares per storm, proportional to proximity * population.
    for (const auto& storm : storms) {
      std::vector<double> weight(counties.size(), 0.0);
      double total = 0;
      for (std::size_t c = 0; c < counties.size(); ++c) {
        double d = detail::km_between(counties[c].lon, counties[c].lat,
                                      storm.center_lon, storm.center_lat);
        weight[c] = std::exp(-(d * d) / (150.0 * 150.0)) *
                    counties[c].population;
        total += weight[c];
      }
      if (total <= 0) continue;
      std::int64_t response_peak = storm.peak_hour + 48;
      for (std::size_t c = 0; c < counties.size(); ++c) {
        double share = weight[c] / total;
        for (std::int64_t k = 0; k < n_hours; ++k) {
          double shape = detail::outage_shape(start_hour + k, response_peak);
          if (shape > 0)
            county_hourly[c][static_cast<std::size_t>(k)] +=
                storm.intensity * share * shape;
        }
      }
    }
    // Zero-inflated background bursts.
    for (std::size_t c = 0; c < counties.size(); ++c) {
      Rng rng(derive_seed(spec.seed, 2000 + c));
      std::int64_t k = 0;
      while (k < n_hours) {
        if (rng.bernoulli(spec.background_burst_rate)) {
          int dur = 2 + static_cast<int>(rng.uniform_index(8));
          double amp = counties[c].population * rng.uniform(0.0004, 0.003);
          for (int j = 0; j < dur && k + j < n_hours; ++j)
            county_hourly[c][static_cast<std::size_t>(k + j)] +=
                amp * std::exp(-0.4 * j) * rng.uniform(0.7, 1.0);
          k += dur;
        } else {
          ++k;
        }
      }
    }
    // Short (and one long) gaps away from storm responses.
    std::vector<std::pair<std::int64_t, std::int64_t>> protected_spans;
    for (const auto& storm : storms)
      protected_spans.emplace_back(storm.peak_hour + 20, storm.peak_hour + 76);
    Rng gap_rng(derive_seed(spec.seed, 3000));
    std::vector<std::vector<bool>> gap(
        counties.size(), std::vector<bool>(static_cast<std::size_t>(n_hours), false));
    for (std::size_t c = 0; c < counties.size(); ++c) {
      if (!gap_rng.bernoulli(0.4)) continue;
      int len = 1 + static_cast<int>(gap_rng.uniform_index(6));
      std::int64_t at = 100 + static_cast<std::int64_t>(
                                  gap_rng.uniform_index(static_cast<std::uint64_t>(
                                      n_hours - 200)));
      bool blocked = false;
      for (auto& [lo, hi] : protected_spans)
        blocked = blocked || (at + len >= lo - start_hour && at <= hi - start_hour);
      if (blocked) continue;
      for (int j = 0; j < len; ++j)
        gap[c][static_cast<std::size_t>(at + j)] = true;
    }

    CsvWriter w(files.outages);
    w.row({"county_id", "timestamp_utc", "customers_out"});
    for (std::size_t c = 0; c < counties.size(); ++c) {
      Rng rng(derive_seed(spec.seed, 4000 + c));
      for (std::int64_t k = 0; k < n_hours; ++k) {
        if (gap[c][static_cast<std::size_t>(k)]) continue;
        double base = county_hourly[c][static_cast<std::size_t>(k)];
        for (int tick = 0; tick < 4; ++tick) {
          double v = std::max(
              0.0, std::round(base * (1.0 + 0.02 * rng.normal())));
          w.row({counties[c].id,
                 format_utc((start_hour + k) * 3600 + tick * 900),
                 format_cell(v)});
        }
      }
    }
  }

  // --- stations / statics / adjacency -------------------------------------
  {
    CsvWriter w(files.stations);
    w.row({"station_id", "lon", "lat"});
    for (const auto& s : stations)
      w.row({s.id, format_cell(s.lon), format_cell(s.lat)});
  }
  {
    CsvWriter w(files.statics);
    w.row({"county_id", "population", "area_km2", "lon", "lat"});
    for (const auto& c : counties)
      w.row({c.id, format_cell(c.population), format_cell(c.area_km2),
             format_cell(c.lon), format_cell(c.lat)});
  }
  {
    CsvWriter w(files.adjacency);
    w.row({"county_id", "neighbor_id"});
    for (std::size_t a = 0; a < counties.size(); ++a)
      for (std::size_t b = a + 1; b < counties.size(); ++b) {
        // Queen contiguity on the generating lattice.
        if (std::abs(counties[a].row - counties[b].row) <= 1 &&
            std::abs(counties[a].col - counties[b].col) <= 1)
          w.row({counties[a].id, counties[b].id});
      }
  }

  // --- external incident reports for the test season ----------------------
  {
    CsvWriter w(files.external_events);
    w.row({"begin_utc", "end_utc", "customers"});
    Rng rng(derive_seed(spec.seed, 5000));
    int idx = 0;
    for (const auto& storm : storms) {
      if (storm.peak_hour < spec.test_begin_hour()) continue;
      std::int64_t response_peak = storm.peak_hour + 48;
      // State-level peak of this storm's response.
      double peak_val = 0;
      for (std::int64_t k = std::max<std::int64_t>(response_peak - 12 - start_hour, 0);
           k <= response_peak + 12 - start_hour && k < n_hours; ++k) {
        double s = 0;
        for (std::size_t c = 0; c < counties.size(); ++c)
          s += county_hourly[c][static_cast<std::size_t>(k)];
        peak_val = std::max(peak_val, s);
      }
      std::int64_t begin_sec = (response_peak - 4) * 3600 + 1740;
      std::int64_t end_sec = (response_peak + 6) * 3600 + 900;
      switch (idx % 4) {
        case 0:  // well-reported, close magnitude
          w.row({format_utc(begin_sec), format_utc(end_sec),
                 format_cell(std::round(peak_val * (1.0 + rng.uniform(-0.08, 0.08))))});
          break;
        case 1:  // moderate discrepancy
          w.row({format_utc(begin_sec), format_utc(end_sec),
                 format_cell(std::round(peak_val * (1.0 + rng.uniform(0.18, 0.32))))});
          break;
        case 2:  // loss of monitoring
          w.row({format_utc(begin_sec), format_utc(end_sec), ""});
          break;
        default:  // multi-entry event, magnitudes split across two rows
          w.row({format_utc(begin_sec), format_utc(end_sec),
                 format_cell(std::round(peak_val * 0.6))});
          w.row({format_utc(begin_sec + 7200), "",
                 format_cell(std::round(peak_val * 0.45))});
          break;
      }
      ++idx;
    }
  }
}

}  // namespace stormcast::synth
