#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stormcast/core.hpp"
#include "stormcast/geo.hpp"

namespace stormcast::interp {

enum class KrigingMethod { ordinary, universal };
enum class BinRule { sturges, fd, fixed };
enum class Drift { none, regional_linear };

struct KrigingConfig {
  KrigingMethod method = KrigingMethod::ordinary;
  double maxlag = 250000.0;  // meters
  BinRule bin_rule = BinRule::fixed;
  int n_lags = 10;           // used by BinRule::fixed
  Drift drift = Drift::none;

  static KrigingConfig ordinary(double maxlag_m) {
    KrigingConfig c;
    c.method = KrigingMethod::ordinary;
    c.maxlag = maxlag_m;
    return c;
  }

  static KrigingConfig universal(double maxlag_m) {
    KrigingConfig c;
    c.method = KrigingMethod::universal;
    c.maxlag = maxlag_m;
    c.drift = Drift::regional_linear;
    return c;
  }
};

struct EmpiricalVariogram {
  std::vector<double> bin_lags;       // mean pair distance per retained bin
  std::vector<double> semivariances;  // gamma-hat per bin
  std::vector<std::size_t> pair_counts;

  std::size_t n_bins() const { return bin_lags.size(); }
};

struct NotEnoughStations : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Spherical variogram: gamma(0) = 0, rises to the sill c0 + c at range a.
struct SphericalModel {
  double nugget = 0;        // c0
  double partial_sill = 0;  // c
  double range = 1;         // a, meters
  bool fallback = false;    // true when not fitted from this hour's data

  double sill() const { return nugget + partial_sill; }

  double operator()(double h) const {
    if (h <= 0) return 0.0;
    if (h >= range) return nugget + partial_sill;
    double r = h / range;
    return nugget + partial_sill * (1.5 * r - 0.5 * r * r * r);
  }
};

// Semivariance cloud binned by pair distance (pairs beyond maxlag excluded).
// Bin count follows cfg.bin_rule; empty bins are dropped.
inline EmpiricalVariogram fit_empirical_variogram(
    const std::vector<double>& values, const std::vector<Point2>& coords,
    const KrigingConfig& cfg) {
  if (values.size() != coords.size())
    throw std::invalid_argument("values/coords size mismatch");
  std::vector<double> pd;  // pair distances
  std::vector<double> ps;  // pair semivariances
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (is_missing(values[i])) continue;
    for (std::size_t j = i + 1; j < values.size(); ++j) {
      if (is_missing(values[j])) continue;
      double d = dist(coords[i], coords[j]);
      if (d > cfg.maxlag) continue;
      pd.push_back(d);
      double dz = values[i] - values[j];
      ps.push_back(0.5 * dz * dz);
    }
  }
  if (pd.empty())
    throw NotEnoughStations("no station pairs within maxlag");

  std::size_t n_pairs = pd.size();
  std::size_t n_bins;
  switch (cfg.bin_rule) {
    case BinRule::sturges:
      n_bins = static_cast<std::size_t>(
                   std::ceil(std::log2(static_cast<double>(n_pairs)))) + 1;
      break;
    case BinRule::fd: {
      std::vector<double> sorted = pd;
      double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
      double width = 2.0 * iqr *
                     std::pow(static_cast<double>(n_pairs), -1.0 / 3.0);
      n_bins = width > 0
                   ? static_cast<std::size_t>(std::ceil(cfg.maxlag / width))
                   : 1;
      break;
    }
    case BinRule::fixed:
    default:
      n_bins = static_cast<std::size_t>(std::max(cfg.n_lags, 1));
      break;
  }
  n_bins = std::max<std::size_t>(n_bins, 1);

  double width = cfg.maxlag / static_cast<double>(n_bins);
  std::vector<double> sum_d(n_bins, 0), sum_g(n_bins, 0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    std::size_t b = std::min(static_cast<std::size_t>(pd[k] / width),
                             n_bins - 1);
    sum_d[b] += pd[k];
    sum_g[b] += ps[k];
    ++count[b];
  }

  EmpiricalVariogram ev;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    ev.bin_lags.push_back(sum_d[b] / static_cast<double>(count[b]));
    ev.semivariances.push_back(sum_g[b] / static_cast<double>(count[b]));
    ev.pair_counts.push_back(count[b]);
  }
  return ev;
}

namespace detail {

// Weighted least squares of (c0, c) for a fixed range; clamps both >= 0.
// Returns the weighted SSE.
inline double wls_at_range(const EmpiricalVariogram& ev, double a, double& c0,
                           double& c) {
  double sww = 0, swb = 0, swbb = 0, swg = 0, swbg = 0;
  for (std::size_t i = 0; i < ev.n_bins(); ++i) {
    double w = static_cast<double>(ev.pair_counts[i]);
    double r = ev.bin_lags[i] / a;
    double basis = r >= 1.0 ? 1.0 : 1.5 * r - 0.5 * r * r * r;
    double g = ev.semivariances[i];
    sww += w;
    swb += w * basis;
    swbb += w * basis * basis;
    swg += w * g;
    swbg += w * basis * g;
  }
  double det = sww * swbb - swb * swb;
  if (std::abs(det) > 1e-12 * sww * std::max(swbb, 1e-300)) {
    c0 = (swg * swbb - swb * swbg) / det;
    c = (sww * swbg - swb * swg) / det;
  } else {
    c0 = 0;
    c = swbb > 0 ? swbg / swbb : 0;
  }
  if (c0 < 0) {
    c0 = 0;
    c = swbb > 0 ? swbg / swbb : 0;
  }
  if (c < 0) {
    c = 0;
    c0 = sww > 0 ? swg / sww : 0;
    if (c0 < 0) c0 = 0;
  }
  double sse = 0;
  for (std::size_t i = 0; i < ev.n_bins(); ++i) {
    double w = static_cast<double>(ev.pair_counts[i]);
    double r = ev.bin_lags[i] / a;
    double basis = r >= 1.0 ? 1.0 : 1.5 * r - 0.5 * r * r * r;
    double resid = ev.semivariances[i] - (c0 + c * basis);
    sse += w * resid * resid;
  }
  return sse;
}

}  // namespace detail

// Weighted least squares (weights = pair counts) of the spherical model.
// The range is found by a coarse grid over [min lag, 2*maxlag] followed by
// golden-section refinement; nugget and partial sill close in linearly.
inline SphericalModel fit_spherical_model(const EmpiricalVariogram& ev,
                                          double maxlag) {
  if (ev.n_bins() < 3)
    throw std::invalid_argument("need >= 3 variogram bins");
  double a_lo = *std::min_element(ev.bin_lags.begin(), ev.bin_lags.end());
  double a_hi = 2.0 * maxlag;
  if (a_lo <= 0) a_lo = 1e-6 * a_hi;

  const int grid = 256;
  double best_a = a_lo, best_sse = std::numeric_limits<double>::infinity();
  double c0, c;
  for (int i = 0; i <= grid; ++i) {
    double a = a_lo + (a_hi - a_lo) * static_cast<double>(i) / grid;
    double sse = detail::wls_at_range(ev, a, c0, c);
    if (sse < best_sse) {
      best_sse = sse;
      best_a = a;
    }
  }
  // Golden-section around the best grid cell.
  double step = (a_hi - a_lo) / grid;
  double lo = std::max(a_lo, best_a - step), hi = std::min(a_hi, best_a + step);
  const double phi = 0.6180339887498949;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = detail::wls_at_range(ev, x1, c0, c);
  double f2 = detail::wls_at_range(ev, x2, c0, c);
  for (int it = 0; it < 90; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = detail::wls_at_range(ev, x1, c0, c);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = detail::wls_at_range(ev, x2, c0, c);
    }
  }
  SphericalModel m;
  m.range = 0.5 * (lo + hi);
  detail::wls_at_range(ev, m.range, m.nugget, m.partial_sill);
  return m;
}

// Default model for hours where no variogram can be fitted and no earlier
// hourly model exists: pure spatial variance at half the search radius.
inline SphericalModel fallback_model(double sample_variance, double maxlag) {
  SphericalModel m;
  m.nugget = 0;
  m.partial_sill = std::max(sample_variance, 1e-12);
  m.range = 0.5 * maxlag;
  m.fallback = true;
  return m;
}

}  // namespace stormcast::interp
