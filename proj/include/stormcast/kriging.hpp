#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/geo.hpp"
#include "stormcast/variogram.hpp"

namespace stormcast::interp {

struct KrigedField {
  std::string parameter;
  std::int64_t hour = 0;
  std::vector<double> values;      // per target, NaN when not estimable
  std::vector<double> variances;   // kriging variance, >= 0 where value present
  std::vector<int> neighbor_counts;
  std::vector<bool> regularized;   // solver needed diagonal jitter
  std::vector<bool> overdrafted;
};

struct Degenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OverdraftRule {
  double radius = 200000.0;  // meters
  double upper = kMissing;   // replace when station value >= upper
  double lower = kMissing;   // ... or <= lower, when set
};

namespace detail {

inline bool solve_kriging_system(Eigen::MatrixXd A, const Eigen::VectorXd& b,
                                 Eigen::VectorXd& sol, double jitter,
                                 int n_stations, bool& regularized) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() == A.rows()) {
    sol = qr.solve(b);
    regularized = false;
    return true;
  }
  for (int i = 0; i < n_stations; ++i) A(i, i) += jitter;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr2(A);
  if (qr2.rank() < A.rows()) return false;
  sol = qr2.solve(b);
  regularized = true;
  return true;
}

}  // namespace detail

// Ordinary / universal kriging of one hour's station values onto target
// points. Stations beyond cfg.maxlag of a target are excluded for that
// target; a target with no in-radius stations stays missing. Near-singular
// systems are retried with +1e-10*sill on the station block diagonal and
// flagged. Universal drift basis is {1, x, y}.
inline KrigedField krige(const std::vector<double>& values,
                         const std::vector<Point2>& stations,
                         const std::vector<Point2>& targets,
                         const SphericalModel& model,
                         const KrigingConfig& cfg) {
  KrigedField out;
  out.values.assign(targets.size(), kMissing);
  out.variances.assign(targets.size(), kMissing);
  out.neighbor_counts.assign(targets.size(), 0);
  out.regularized.assign(targets.size(), false);
  out.overdrafted.assign(targets.size(), false);

  std::vector<int> present;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!is_missing(values[i])) present.push_back(static_cast<int>(i));
  if (present.empty()) return out;

  if (present.size() > 1) {
    bool all_same = true;
    for (std::size_t k = 1; k < present.size() && all_same; ++k)
      all_same = stations[present[k]].x == stations[present[0]].x &&
                 stations[present[k]].y == stations[present[0]].y;
    if (all_same) throw Degenerate("all station coordinates identical");
  }

  // Scale drift coordinates by maxlag to keep the system well conditioned.
  double drift_scale = cfg.maxlag > 0 ? cfg.maxlag : 1.0;
  bool universal = cfg.method == KrigingMethod::universal;
  double jitter = 1e-10 * std::max(model.sill(), 1e-12);

  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::vector<int> in_radius;
    for (int i : present)
      if (dist(stations[i], targets[t]) <= cfg.maxlag) in_radius.push_back(i);
    int n = static_cast<int>(in_radius.size());
    out.neighbor_counts[t] = n;
    if (n == 0) continue;

    // Universal kriging needs enough stations to support the drift basis.
    bool use_drift = universal && n >= 3;
    int m = n + 1 + (use_drift ? 2 : 0);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double g = model(dist(stations[in_radius[i]], stations[in_radius[j]]));
        A(i, j) = g;
        A(j, i) = g;
      }
      A(i, n) = 1.0;
      A(n, i) = 1.0;
      if (use_drift) {
        A(i, n + 1) = stations[in_radius[i]].x / drift_scale;
        A(n + 1, i) = A(i, n + 1);
        A(i, n + 2) = stations[in_radius[i]].y / drift_scale;
        A(n + 2, i) = A(i, n + 2);
      }
      b(i) = model(dist(stations[in_radius[i]], targets[t]));
    }
    b(n) = 1.0;
    if (use_drift) {
      b(n + 1) = targets[t].x / drift_scale;
      b(n + 2) = targets[t].y / drift_scale;
    }

    Eigen::VectorXd sol;
    bool regularized = false;
    if (!detail::solve_kriging_system(A, b, sol, jitter, n, regularized))
      continue;  // unsolvable even with jitter; leave missing
    out.regularized[t] = regularized;

    double pred = 0, var = 0;
    for (int i = 0; i < n; ++i) {
      pred += sol(i) * values[in_radius[i]];
      var += sol(i) * b(i);
    }
    for (int k = n; k < m; ++k) var += sol(k) * b(k);
    out.values[t] = pred;
    out.variances[t] = std::max(var, 0.0);
  }
  return out;
}

// Replaces a kriged centroid value with the nearest in-radius station value
// that breaches the rule's threshold. The replacement always equals an
// observed value.
inline void overdraft(KrigedField& field, const std::vector<double>& obs,
                      const KdTree2& station_tree,
                      const std::vector<Point2>& targets,
                      const OverdraftRule& rule) {
  bool has_upper = !is_missing(rule.upper);
  bool has_lower = !is_missing(rule.lower);
  if (!has_upper && !has_lower) return;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto near = station_tree.within_radius(targets[t], rule.radius);
    for (int i : near) {  // sorted by distance; first breach wins
      double z = obs[static_cast<std::size_t>(i)];
      if (is_missing(z)) continue;
      bool breach = (has_upper && z >= rule.upper) ||
                    (has_lower && z <= rule.lower);
      if (breach) {
        field.values[t] = z;
        field.overdrafted[t] = true;
        break;
      }
    }
  }
}

// |z_i - z_j| / d to the nearest in-radius neighbor, in percent per km.
// Stations with no neighbor inside the radius get 0.
inline std::vector<double> rh_gradient(const std::vector<double>& rh,
                                       const std::vector<Point2>& stations,
                                       double radius = 100000.0) {
  std::vector<Point2> pts;
  std::vector<int> orig;
  for (std::size_t i = 0; i < rh.size(); ++i) {
    if (is_missing(rh[i])) continue;
    pts.push_back(stations[i]);
    orig.push_back(static_cast<int>(i));
  }
  KdTree2 tree(pts);
  std::vector<double> out(rh.size(), kMissing);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double d = 0;
    int j = tree.nearest(pts[k], static_cast<int>(k), &d);
    std::size_t i = static_cast<std::size_t>(orig[k]);
    if (j < 0 || d > radius) {
      out[i] = 0.0;
      continue;
    }
    double dz = std::abs(rh[i] - rh[static_cast<std::size_t>(orig[j])]);
    out[i] = d > 0 ? dz / (d / 1000.0) : 0.0;
  }
  return out;
}

enum class JoinKind { numeric_max, boolean_or };
enum class JoinEmpty { zero, missing };

// Spatial join for discrete / narrow-footprint parameters: max (numeric) or
// OR (boolean, encoded 0/1) over stations within `radius` of each target.
inline std::vector<double> polygon_join(const std::vector<double>& values,
                                        const KdTree2& station_tree,
                                        const std::vector<Point2>& targets,
                                        double radius, JoinKind kind,
                                        JoinEmpty empty) {
  std::vector<double> out(targets.size(), kMissing);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto near = station_tree.within_radius(targets[t], radius);
    double acc = kMissing;
    for (int i : near) {
      double z = values[static_cast<std::size_t>(i)];
      if (is_missing(z)) continue;
      if (kind == JoinKind::boolean_or)
        acc = (is_missing(acc) ? 0.0 : acc) != 0.0 || z != 0.0 ? 1.0 : 0.0;
      else if (is_missing(acc) || z > acc)
        acc = z;
    }
    if (is_missing(acc))
      out[t] = empty == JoinEmpty::zero ? 0.0 : kMissing;
    else
      out[t] = acc;
  }
  return out;
}

struct HoldoutResult {
  double rmse_mean = kMissing;  // mean of daily RMSE
  double rmse_sd = kMissing;
  int n_days = 0;
  int n_hours = 0;
};

// Leave-one-station-out validation: for each sampled hour, refit the
// variogram and krige at the held-out station's location from the remaining
// stations. Errors are grouped into daily RMSE and summarized mean +/- sd.
template <typename HourValues>
HoldoutResult holdout_validate(std::size_t station_index,
                               const std::vector<Point2>& stations,
                               const std::vector<std::int64_t>& hours,
                               HourValues&& values_at_hour,
                               const KrigingConfig& cfg) {
  if (hours.empty()) throw std::invalid_argument("no hours sampled");
  std::vector<Point2> rest;
  for (std::size_t i = 0; i < stations.size(); ++i)
    if (i != station_index) rest.push_back(stations[i]);
  std::vector<Point2> target{stations[station_index]};

  std::map<std::int64_t, std::vector<double>> day_sq_errors;
  int n_hours = 0;
  std::optional<SphericalModel> last_model;
  for (std::int64_t hour : hours) {
    std::vector<double> all = values_at_hour(hour);
    double observed = all[station_index];
    if (is_missing(observed)) continue;
    std::vector<double> rest_vals;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (i != station_index) rest_vals.push_back(all[i]);

    SphericalModel model;
    try {
      auto ev = fit_empirical_variogram(rest_vals, rest, cfg);
      model = fit_spherical_model(ev, cfg.maxlag);
      last_model = model;
    } catch (const std::exception&) {
      if (last_model) {
        model = *last_model;
        model.fallback = true;
      } else {
        std::vector<double> present;
        for (double v : rest_vals)
          if (!is_missing(v)) present.push_back(v);
        double m = mean(present), var = 0;
        for (double v : present) var += (v - m) * (v - m);
        var = present.size() > 1 ? var / (present.size() - 1) : 0.0;
        model = fallback_model(var, cfg.maxlag);
      }
    }
    KrigedField f = krige(rest_vals, rest, target, model, cfg);
    if (is_missing(f.values[0])) continue;
    double err = f.values[0] - observed;
    day_sq_errors[hour / 24].push_back(err * err);
    ++n_hours;
  }
  if (n_hours == 0)
    throw std::invalid_argument("held-out station has no usable observations");

  std::vector<double> daily_rmse;
  for (const auto& [day, errs] : day_sq_errors)
    daily_rmse.push_back(std::sqrt(mean(errs)));
  HoldoutResult r;
  r.rmse_mean = mean(daily_rmse);
  r.rmse_sd = daily_rmse.size() > 1 ? sample_sd(daily_rmse) : 0.0;
  r.n_days = static_cast<int>(daily_rmse.size());
  r.n_hours = n_hours;
  return r;
}

}  // namespace stormcast::interp
