#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stormcast/bootstrap.hpp"
#include "stormcast/config.hpp"
#include "stormcast/core.hpp"
#include "stormcast/csv.hpp"
#include "stormcast/events.hpp"
#include "stormcast/features.hpp"
#include "stormcast/geo.hpp"
#include "stormcast/ingest.hpp"
#include "stormcast/kriging.hpp"
#include "stormcast/lstm.hpp"
#include "stormcast/variogram.hpp"

namespace stormcast::pipeline {

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_file(const std::string& path, const std::string& producer) {
  if (!std::filesystem::exists(path))
    throw MissingArtifact("missing artifact " + path + " (produced by '" +
                          producer + "')");
}

// Stage artifact names inside the output directory.
struct Artifacts {
  static constexpr const char* outage_hourly = "outage_hourly.csv";
  static constexpr const char* station_hourly = "station_hourly.csv";
  static constexpr const char* county_hourly = "county_hourly.csv";
  static constexpr const char* feature_matrix = "features.csv";
  static constexpr const char* two_stage_bundle = "two_stage.bundle";
  static constexpr const char* baseline_bundle = "baseline.bundle";
  static constexpr const char* train_report = "train_report.json";
  static constexpr const char* predictions = "predictions.csv";
  static constexpr const char* report_json = "report.json";
  static constexpr const char* bootstrap_json = "bootstrap.json";
  static constexpr const char* figure_svg = "figure.svg";
  static constexpr const char* figure_csv = "figure_series.csv";
};

inline std::string artifact(const std::string& out_dir, const char* name) {
  return (std::filesystem::path(out_dir) / name).string();
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ParamConfig {
  std::string name;
  bool join = false;   // polygon join instead of kriging
  bool flag = false;   // boolean OR semantics in the join
  interp::KrigingConfig kriging;
  double join_radius = 100000.0;
  interp::JoinEmpty join_empty = interp::JoinEmpty::zero;
  bool clamp_nonneg = false;
  double clamp_max = kMissing;  // e.g. 100 for relative humidity
  bool has_overdraft = false;
  interp::OverdraftRule overdraft;
  double overdraft_upper_quantile = kMissing;  // recompute from the train span
  double overdraft_lower_quantile = kMissing;
};

struct PipelineConfig {
  // paths
  std::string outages, weather, stations, statics, adjacency, external_events;
  // spans (UTC hours)
  std::int64_t train_begin = 0, train_end = 0, test_begin = 0, test_end = 0;
  int horizon = 48;
  int max_gap = 4;
  // features
  features::IdwConfig idw;
  // model
  int l1_target = 8;
  std::vector<double> l1_grid{3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  std::vector<double> c_grid{1e-3, 1e-2, 1e-1, 1.0};
  double class_weight_pos = 5.0;
  int cv_folds = 3;
  double tau = 0.70;
  int regressor_features = 35;
  model::TrainConfig train;
  int undersample_window = 48;
  int min_anoms = 3;
  double neg_keep = -1.0;  // < 0 means auto-tune to target_share
  double target_share = 0.34;
  bool target_state_sum = false;
  // eval
  double peak_threshold = 50000.0;
  eval::EventDetectorConfig detector;
  std::vector<int> deltas{0, 6, 12, 24, 36, 48};
  std::vector<int> omegas{6, 12, 24, 36, 48};
  int mase_lag = 24;
  std::string scope = "all";
  eval::BootstrapConfig bootstrap;

  std::vector<ParamConfig> params;

  std::size_t axis_len() const {
    return static_cast<std::size_t>(test_end - train_begin);
  }
};

namespace detail {

inline ParamConfig kriged_param(const std::string& name,
                                interp::KrigingMethod method, double maxlag_km,
                                interp::BinRule rule, int n_lags) {
  ParamConfig p;
  p.name = name;
  p.kriging.method = method;
  p.kriging.maxlag = maxlag_km * 1000.0;
  p.kriging.bin_rule = rule;
  p.kriging.n_lags = n_lags;
  p.kriging.drift = method == interp::KrigingMethod::universal
                        ? interp::Drift::regional_linear
                        : interp::Drift::none;
  return p;
}

inline std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace detail

// Interpolation defaults per parameter. Dew point and wind speed carry the
// documented overdraft rules; discrete parameters use the spatial join.
inline std::vector<ParamConfig> default_params() {
  using interp::BinRule;
  using interp::KrigingMethod;
  std::vector<ParamConfig> out;
  auto add = [&](ParamConfig p) { out.push_back(std::move(p)); };

  add(detail::kriged_param("tmpf", KrigingMethod::universal, 250,
                           BinRule::sturges, 10));
  add(detail::kriged_param("alti", KrigingMethod::universal, 250,
                           BinRule::sturges, 10));
  add(detail::kriged_param("mslp", KrigingMethod::universal, 250,
                           BinRule::sturges, 10));

  ParamConfig dwpf = detail::kriged_param("dwpf", KrigingMethod::universal, 250,
                                          BinRule::sturges, 10);
  dwpf.has_overdraft = true;
  dwpf.overdraft = {200000.0, 69.8, 49.17};
  add(dwpf);

  ParamConfig relh = detail::kriged_param("relh", KrigingMethod::ordinary, 100,
                                          BinRule::sturges, 10);
  relh.clamp_nonneg = true;
  relh.clamp_max = 100.0;
  add(relh);

  ParamConfig sknt = detail::kriged_param("sknt", KrigingMethod::ordinary, 100,
                                          BinRule::fd, 15);
  sknt.clamp_nonneg = true;
  sknt.has_overdraft = true;
  sknt.overdraft = {100000.0, 18.0, kMissing};
  add(sknt);

  add(detail::kriged_param("drct_u", KrigingMethod::ordinary, 180,
                           BinRule::fixed, 7));
  add(detail::kriged_param("drct_v", KrigingMethod::ordinary, 180,
                           BinRule::fixed, 7));

  auto join_param = [&](const std::string& name, bool flag,
                        interp::JoinEmpty empty) {
    ParamConfig p;
    p.name = name;
    p.join = true;
    p.flag = flag;
    p.join_empty = empty;
    add(p);
  };
  join_param("gust", false, interp::JoinEmpty::missing);
  join_param("p01i", false, interp::JoinEmpty::zero);
  join_param("ts_flag", true, interp::JoinEmpty::zero);
  join_param("sq_flag", true, interp::JoinEmpty::zero);
  join_param("hr_flag", true, interp::JoinEmpty::zero);
  join_param("relh_grad", false, interp::JoinEmpty::zero);
  return out;
}

inline Config make_default_config(const std::string& data_dir,
                                  const std::string& train_begin,
                                  const std::string& train_end,
                                  const std::string& test_begin,
                                  const std::string& test_end,
                                  std::uint64_t seed) {
  namespace fs = std::filesystem;
  Config c;
  auto p = [&](const char* n) { return (fs::path(data_dir) / n).string(); };
  c.set("paths", "outages", p("outages.csv"));
  c.set("paths", "weather", p("weather.csv"));
  c.set("paths", "stations", p("stations.csv"));
  c.set("paths", "statics", p("statics.csv"));
  c.set("paths", "adjacency", p("adjacency.csv"));
  c.set("paths", "external_events", p("external_events.csv"));

  c.set("spans", "train_begin", train_begin);
  c.set("spans", "train_end", train_end);
  c.set("spans", "test_begin", test_begin);
  c.set("spans", "test_end", test_end);

  c.set("ingest", "max_gap_hours", "4");

  c.set("features", "idw_k", "5");
  c.set("features", "idw_power", "2");

  c.set("model", "horizon", "48");
  c.set("model", "tau", "0.70");
  c.set("model", "l1_target_features", "8");
  c.set("model", "l1_lambda_grid", "0.0003,0.001,0.003,0.01,0.03,0.1");
  c.set("model", "c_grid", "0.001,0.01,0.1,1");
  c.set("model", "class_weight_pos", "5");
  c.set("model", "cv_folds", "3");
  c.set("model", "regressor_features", "35");
  c.set("model", "hidden_units", "16");
  c.set("model", "learning_rate", "0.001");
  c.set("model", "batch_size", "32");
  c.set("model", "max_epochs", "30");
  c.set("model", "early_stop_patience", "2");
  c.set("model", "validation_fraction", "0.10");
  c.set("model", "seed", std::to_string(seed));
  c.set("model", "undersample_window", "48");
  c.set("model", "undersample_min_anoms", "3");
  c.set("model", "undersample_neg_keep", "auto");
  c.set("model", "undersample_target_share", "0.34");
  c.set("model", "target_mode", "county");

  c.set("eval", "peak_threshold", "50000");
  c.set("eval", "ma_window", "5");
  c.set("eval", "merge_gap", "24");
  c.set("eval", "deltas", "0,6,12,24,36,48");
  c.set("eval", "omegas", "6,12,24,36,48");
  c.set("eval", "mase_lag", "24");
  c.set("eval", "scope", "all");
  c.set("eval", "bootstrap_replicates", "500");
  c.set("eval", "bootstrap_block", "168");
  c.set("eval", "bootstrap_seed", std::to_string(seed));
  c.set("eval", "bootstrap_resample_prediction_events", "true");

  for (const ParamConfig& p2 : default_params()) {
    std::string sec = "interp." + p2.name;
    if (p2.join) {
      c.set(sec, "method", "join");
      c.set(sec, "join_radius_km", format_cell(p2.join_radius / 1000.0));
    } else {
      c.set(sec, "method",
            p2.kriging.method == interp::KrigingMethod::universal ? "universal"
                                                                  : "ordinary");
      c.set(sec, "maxlag_km", format_cell(p2.kriging.maxlag / 1000.0));
      const char* rule =
          p2.kriging.bin_rule == interp::BinRule::sturges
              ? "sturges"
              : p2.kriging.bin_rule == interp::BinRule::fd ? "fd" : "fixed";
      c.set(sec, "bin_rule", rule);
      c.set(sec, "n_lags", std::to_string(p2.kriging.n_lags));
      c.set(sec, "drift",
            p2.kriging.drift == interp::Drift::regional_linear
                ? "regional_linear"
                : "none");
      if (p2.has_overdraft) {
        c.set(sec, "overdraft_radius_km",
              format_cell(p2.overdraft.radius / 1000.0));
        if (!is_missing(p2.overdraft.upper))
          c.set(sec, "overdraft_upper", format_cell(p2.overdraft.upper));
        if (!is_missing(p2.overdraft.lower))
          c.set(sec, "overdraft_lower", format_cell(p2.overdraft.lower));
      }
    }
  }
  return c;
}

inline PipelineConfig load_pipeline_config(const Config& c) {
  PipelineConfig p;
  p.outages = c.get("paths", "outages");
  p.weather = c.get("paths", "weather");
  p.stations = c.get("paths", "stations");
  p.statics = c.get("paths", "statics");
  p.adjacency = c.get_or("paths", "adjacency", "");
  p.external_events = c.get_or("paths", "external_events", "");

  p.train_begin = hour_of(c.get_utc("spans", "train_begin"));
  p.train_end = hour_of(c.get_utc("spans", "train_end"));
  p.test_begin = hour_of(c.get_utc("spans", "test_begin"));
  p.test_end = hour_of(c.get_utc("spans", "test_end"));
  if (!(p.train_begin < p.train_end && p.train_end <= p.test_begin &&
        p.test_begin < p.test_end))
    throw ConfigError("[spans] train span must strictly precede test span");

  p.max_gap = static_cast<int>(c.get_int_or("ingest", "max_gap_hours", 4));

  p.idw.k = static_cast<int>(c.get_int_or("features", "idw_k", 5));
  p.idw.power = c.get_double_or("features", "idw_power", 2.0);

  p.horizon = static_cast<int>(c.get_int_or("model", "horizon", 48));
  if (p.horizon <= 0) throw ConfigError("[model] horizon must be > 0");
  p.tau = c.get_double_or("model", "tau", 0.70);
  if (!(p.tau > 0 && p.tau < 1))
    throw ConfigError("[model] tau must lie in (0,1)");
  p.l1_target =
      static_cast<int>(c.get_int_or("model", "l1_target_features", 8));
  p.class_weight_pos = c.get_double_or("model", "class_weight_pos", 5.0);
  p.cv_folds = static_cast<int>(c.get_int_or("model", "cv_folds", 3));
  p.regressor_features =
      static_cast<int>(c.get_int_or("model", "regressor_features", 35));
  p.train.hidden = static_cast<int>(c.get_int_or("model", "hidden_units", 16));
  p.train.learning_rate = c.get_double_or("model", "learning_rate", 1e-3);
  p.train.batch_size =
      static_cast<int>(c.get_int_or("model", "batch_size", 32));
  p.train.max_epochs =
      static_cast<int>(c.get_int_or("model", "max_epochs", 30));
  p.train.patience =
      static_cast<int>(c.get_int_or("model", "early_stop_patience", 2));
  p.train.val_fraction = c.get_double_or("model", "validation_fraction", 0.10);
  p.train.seed = static_cast<std::uint64_t>(c.get_int_or("model", "seed", 1));
  p.undersample_window =
      static_cast<int>(c.get_int_or("model", "undersample_window", 48));
  p.min_anoms =
      static_cast<int>(c.get_int_or("model", "undersample_min_anoms", 3));
  std::string nk = c.get_or("model", "undersample_neg_keep", "auto");
  p.neg_keep =
      nk == "auto" ? -1.0 : c.get_double("model", "undersample_neg_keep");
  p.target_share = c.get_double_or("model", "undersample_target_share", 0.34);
  std::string tm = c.get_or("model", "target_mode", "county");
  if (tm != "county" && tm != "state_sum")
    throw ConfigError("[model] target_mode must be county or state_sum");
  p.target_state_sum = tm == "state_sum";
  if (c.has("model", "l1_lambda_grid"))
    p.l1_grid = detail::parse_double_list(c.get("model", "l1_lambda_grid"));
  if (c.has("model", "c_grid"))
    p.c_grid = detail::parse_double_list(c.get("model", "c_grid"));

  p.peak_threshold = c.get_double_or("eval", "peak_threshold", 50000.0);
  p.detector.threshold = p.peak_threshold;
  p.detector.ma_window = static_cast<int>(c.get_int_or("eval", "ma_window", 5));
  p.detector.merge_gap =
      static_cast<int>(c.get_int_or("eval", "merge_gap", 24));
  if (c.has("eval", "deltas")) p.deltas = c.get_int_list("eval", "deltas");
  if (c.has("eval", "omegas")) p.omegas = c.get_int_list("eval", "omegas");
  p.mase_lag = static_cast<int>(c.get_int_or("eval", "mase_lag", 24));
  p.scope = c.get_or("eval", "scope", "all");
  if (p.scope != "all" && p.scope != "available")
    throw ConfigError("[eval] scope must be all or available");
  p.bootstrap.block =
      static_cast<int>(c.get_int_or("eval", "bootstrap_block", 168));
  p.bootstrap.replicates =
      static_cast<int>(c.get_int_or("eval", "bootstrap_replicates", 500));
  p.bootstrap.seed =
      static_cast<std::uint64_t>(c.get_int_or("eval", "bootstrap_seed", 1));
  p.bootstrap.deltas = p.deltas;
  p.bootstrap.omegas = p.omegas;
  p.bootstrap.threshold = p.peak_threshold;
  p.bootstrap.detector = p.detector;
  p.bootstrap.mase_lag = p.mase_lag;
  p.bootstrap.resample_prediction_events =
      c.get_bool_or("eval", "bootstrap_resample_prediction_events", true);

  p.params = default_params();
  for (ParamConfig& pc : p.params) {
    std::string sec = "interp." + pc.name;
    if (!c.has(sec, "method")) continue;
    std::string method = c.get(sec, "method");
    pc.join = method == "join";
    if (pc.join) {
      pc.join_radius =
          c.get_double_or(sec, "join_radius_km", pc.join_radius / 1000.0) *
          1000.0;
      continue;
    }
    if (method == "universal") {
      pc.kriging.method = interp::KrigingMethod::universal;
      pc.kriging.drift = interp::Drift::regional_linear;
    } else if (method == "ordinary") {
      pc.kriging.method = interp::KrigingMethod::ordinary;
      pc.kriging.drift = interp::Drift::none;
    } else {
      throw ConfigError("[" + sec +
                        "] method must be ordinary, universal or join");
    }
    pc.kriging.maxlag =
        c.get_double_or(sec, "maxlag_km", pc.kriging.maxlag / 1000.0) * 1000.0;
    std::string rule = c.get_or(sec, "bin_rule", "sturges");
    if (rule == "sturges")
      pc.kriging.bin_rule = interp::BinRule::sturges;
    else if (rule == "fd")
      pc.kriging.bin_rule = interp::BinRule::fd;
    else if (rule == "fixed")
      pc.kriging.bin_rule = interp::BinRule::fixed;
    else
      throw ConfigError("[" + sec + "] bin_rule must be sturges, fd or fixed");
    pc.kriging.n_lags =
        static_cast<int>(c.get_int_or(sec, "n_lags", pc.kriging.n_lags));
    if (c.has(sec, "overdraft_radius_km")) {
      pc.has_overdraft = true;
      pc.overdraft.radius = c.get_double(sec, "overdraft_radius_km") * 1000.0;
      pc.overdraft.upper = c.get_double_or(sec, "overdraft_upper", kMissing);
      pc.overdraft.lower = c.get_double_or(sec, "overdraft_lower", kMissing);
      pc.overdraft_upper_quantile =
          c.get_double_or(sec, "overdraft_upper_quantile", kMissing);
      pc.overdraft_lower_quantile =
          c.get_double_or(sec, "overdraft_lower_quantile", kMissing);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Artifact I/O shared by stages
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<features::CountyStatic> load_statics(
    const std::string& path) {
  CsvTable t = read_csv(path);
  int c_id = t.column("county_id"), c_pop = t.column("population"),
      c_area = t.column("area_km2"), c_lon = t.column("lon"),
      c_lat = t.column("lat");
  if (c_id < 0 || c_pop < 0 || c_area < 0 || c_lon < 0 || c_lat < 0)
    throw std::runtime_error(
        path + ": expected county_id,population,area_km2,lon,lat");
  std::vector<features::CountyStatic> out;
  for (const auto& row : t.rows)
    out.push_back({row[c_id], parse_cell(row[c_pop]), parse_cell(row[c_area]),
                   parse_cell(row[c_lon]), parse_cell(row[c_lat])});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.county_id < b.county_id;
  });
  return out;
}

inline std::map<std::string, std::set<std::string>> load_adjacency(
    const std::string& path) {
  CsvTable t = read_csv(path);
  int c_a = t.column("county_id"), c_b = t.column("neighbor_id");
  if (c_a < 0 || c_b < 0)
    throw std::runtime_error(path + ": expected county_id,neighbor_id");
  std::map<std::string, std::set<std::string>> adj;
  for (const auto& row : t.rows) {
    adj[row[c_a]].insert(row[c_b]);
    adj[row[c_b]].insert(row[c_a]);
  }
  return adj;
}

inline void write_outage_hourly(const std::string& path,
                                const ingest::OutageHourlyGrid& g) {
  CsvWriter w(path);
  w.row({"county_id", "hour_utc", "customers"});
  for (std::size_t c = 0; c < g.counties.size(); ++c)
    for (std::size_t h = 0; h < g.n_hours(); ++h)
      w.row({g.counties[c],
             format_hour(g.start_hour + static_cast<std::int64_t>(h)),
             format_cell(g.values[c][h])});
}

inline ingest::OutageHourlyGrid read_outage_hourly(const std::string& path,
                                                   std::int64_t axis_start,
                                                   std::size_t axis_len) {
  CsvTable t = read_csv(path);
  int c_id = t.column("county_id"), c_h = t.column("hour_utc"),
      c_v = t.column("customers");
  if (c_id < 0 || c_h < 0 || c_v < 0)
    throw std::runtime_error(path + ": expected county_id,hour_utc,customers");
  std::set<std::string> ids;
  for (const auto& row : t.rows) ids.insert(row[c_id]);
  ingest::OutageHourlyGrid g;
  g.counties.assign(ids.begin(), ids.end());
  g.start_hour = axis_start;
  g.values.assign(g.counties.size(), std::vector<double>(axis_len, kMissing));
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.counties.size(); ++i) index[g.counties[i]] = i;
  for (const auto& row : t.rows) {
    std::int64_t h = hour_of(parse_utc_or_throw(row[c_h])) - axis_start;
    if (h < 0 || h >= static_cast<std::int64_t>(axis_len)) continue;
    g.values[index[row[c_id]]][static_cast<std::size_t>(h)] =
        parse_cell(row[c_v]);
  }
  return g;
}

struct StationHourlyData {
  std::vector<std::string> station_ids;
  std::vector<Point2> station_xy;  // projected, filled by the interp stage
  std::int64_t start_hour = 0;
  std::size_t n_hours = 0;
  std::map<std::string, std::vector<std::vector<double>>> params;  // [station][hour]
};

inline const std::vector<const char*>& station_param_names() {
  static const std::vector<const char*> names = {
      "tmpf", "dwpf", "relh",    "drct",    "sknt",   "p01i", "alti",
      "mslp", "gust", "u",       "v",       "ts_flag", "sq_flag", "hr_flag"};
  return names;
}

inline void write_station_hourly(
    const std::string& path, const std::vector<std::string>& station_ids,
    std::int64_t start_hour, std::size_t n_hours,
    const std::vector<std::vector<ingest::StationHourly>>& rows) {
  CsvWriter w(path);
  std::vector<std::string> header{"station_id", "hour_utc"};
  for (const char* p : station_param_names()) header.emplace_back(p);
  w.row(header);
  for (std::size_t s = 0; s < station_ids.size(); ++s)
    for (std::size_t h = 0; h < n_hours; ++h) {
      const ingest::StationHourly& r = rows[s][h];
      w.row({station_ids[s],
             format_hour(start_hour + static_cast<std::int64_t>(h)),
             format_cell(r.tmpf), format_cell(r.dwpf), format_cell(r.relh),
             format_cell(r.drct), format_cell(r.sknt), format_cell(r.p01i),
             format_cell(r.alti), format_cell(r.mslp), format_cell(r.gust),
             format_cell(r.u), format_cell(r.v),
             format_cell(r.ts_flag ? 1.0 : 0.0),
             format_cell(r.sq_flag ? 1.0 : 0.0),
             format_cell(r.hr_flag ? 1.0 : 0.0)});
    }
}

inline StationHourlyData read_station_hourly(const std::string& path,
                                             std::int64_t axis_start,
                                             std::size_t axis_len) {
  CsvTable t = read_csv(path);
  StationHourlyData d;
  d.start_hour = axis_start;
  d.n_hours = axis_len;
  int c_id = t.column("station_id"), c_h = t.column("hour_utc");
  if (c_id < 0 || c_h < 0)
    throw std::runtime_error(path + ": expected station_id,hour_utc,...");
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) index.emplace(row[c_id], 0);
  std::size_t k = 0;
  for (auto& [id, idx] : index) {
    idx = k++;
    d.station_ids.push_back(id);
  }
  std::vector<int> cols;
  for (const char* p : station_param_names()) {
    int c = t.column(p);
    if (c < 0) throw std::runtime_error(path + ": missing column " + p);
    cols.push_back(c);
    d.params[p].assign(d.station_ids.size(),
                       std::vector<double>(axis_len, kMissing));
  }
  for (const auto& row : t.rows) {
    std::int64_t h = hour_of(parse_utc_or_throw(row[c_h])) - axis_start;
    if (h < 0 || h >= static_cast<std::int64_t>(axis_len)) continue;
    std::size_t s = index[row[c_id]];
    for (std::size_t pi = 0; pi < cols.size(); ++pi)
      d.params[station_param_names()[pi]][s][static_cast<std::size_t>(h)] =
          parse_cell(row[static_cast<std::size_t>(cols[pi])]);
  }
  return d;
}

inline void write_feature_matrix(const std::string& path,
                                 const features::FeatureMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "county_id,hour_utc";
  for (const auto& n : m.feature_names) out << ',' << n;
  out << ",flag48,log_mag48\n";
  std::string line;
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    line.clear();
    line += m.counties[static_cast<std::size_t>(m.county_index[r])];
    line += ',';
    line += format_hour(m.hours[r]);
    for (std::size_t f = 0; f < m.n_features(); ++f) {
      line += ',';
      line += format_cell(m.at(r, f));
    }
    line += ',';
    line += format_cell(m.flag48[r]);
    line += ',';
    line += format_cell(m.log_mag48[r]);
    line += '\n';
    out << line;
  }
}

inline features::FeatureMatrix read_feature_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty feature matrix");
  auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "county_id" || header[1] != "hour_utc" ||
      header[header.size() - 2] != "flag48" || header.back() != "log_mag48")
    throw std::runtime_error(path + ": unexpected feature matrix header");

  features::FeatureMatrix m;
  for (std::size_t i = 2; i + 2 < header.size(); ++i)
    m.feature_names.push_back(header[i]);
  std::size_t nf = m.feature_names.size();

  std::map<std::string, int> county_index;
  std::vector<std::string> row_county;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ": ragged feature row");
    row_county.push_back(cells[0]);
    county_index.emplace(cells[0], 0);
    m.hours.push_back(hour_of(parse_utc_or_throw(cells[1])));
    for (std::size_t f = 0; f < nf; ++f)
      m.x.push_back(parse_cell(cells[2 + f]));
    m.flag48.push_back(parse_cell(cells[2 + nf]));
    m.log_mag48.push_back(parse_cell(cells[3 + nf]));
  }
  int k = 0;
  for (auto& [id, idx] : county_index) {
    idx = k++;
    m.counties.push_back(id);
  }
  m.county_index.resize(row_county.size());
  for (std::size_t r = 0; r < row_county.size(); ++r)
    m.county_index[r] = county_index[row_county[r]];
  return m;
}

struct Predictions {
  std::int64_t start_hour = 0;
  std::vector<double> y_true;
  std::vector<double> two_stage;       // NaN where unavailable
  std::vector<bool> two_stage_avail;
  std::vector<double> baseline;
  std::vector<bool> baseline_avail;
};

inline void write_predictions(const std::string& path, const Predictions& p) {
  CsvWriter w(path);
  w.row({"hour_utc", "y_true", "yhat_two_stage", "two_stage_available",
         "yhat_baseline", "baseline_available"});
  for (std::size_t h = 0; h < p.y_true.size(); ++h)
    w.row({format_hour(p.start_hour + static_cast<std::int64_t>(h)),
           format_cell(p.y_true[h]), format_cell(p.two_stage[h]),
           p.two_stage_avail[h] ? "1" : "0", format_cell(p.baseline[h]),
           p.baseline_avail[h] ? "1" : "0"});
}

inline Predictions read_predictions(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_h = t.column("hour_utc"), c_y = t.column("y_true"),
      c_ts = t.column("yhat_two_stage"), c_ta = t.column("two_stage_available"),
      c_b = t.column("yhat_baseline"), c_ba = t.column("baseline_available");
  if (c_h < 0 || c_y < 0 || c_ts < 0 || c_ta < 0 || c_b < 0 || c_ba < 0)
    throw std::runtime_error(path + ": unexpected predictions header");
  Predictions p;
  bool first = true;
  for (const auto& row : t.rows) {
    std::int64_t hour = hour_of(parse_utc_or_throw(row[c_h]));
    if (first) {
      p.start_hour = hour;
      first = false;
    }
    p.y_true.push_back(parse_cell(row[c_y]));
    p.two_stage.push_back(parse_cell(row[c_ts]));
    p.two_stage_avail.push_back(row[c_ta] == "1");
    p.baseline.push_back(parse_cell(row[c_b]));
    p.baseline_avail.push_back(row[c_ba] == "1");
  }
  return p;
}

}  // namespace detail

}  // namespace stormcast::pipeline
