#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "stormcast/core.hpp"

namespace stormcast::eval {

struct MoransResult {
  double moran_i = 0;
  double z = 0;
  double p = 1;
  int permutations = 0;
};

namespace detail {

// Moran's I with row-standardized weights over adjacency lists.
inline double moran_statistic(const std::vector<double>& x,
                              const std::vector<std::vector<int>>& neighbors) {
  std::size_t n = x.size();
  double xbar = 0;
  for (double v : x) xbar += v;
  xbar /= static_cast<double>(n);
  double denom = 0;
  for (double v : x) denom += (v - xbar) * (v - xbar);
  double num = 0, s0 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (neighbors[i].empty()) continue;
    double w = 1.0 / static_cast<double>(neighbors[i].size());
    for (int j : neighbors[i]) {
      num += w * (x[i] - xbar) * (x[static_cast<std::size_t>(j)] - xbar);
      s0 += w;
    }
  }
  return (static_cast<double>(n) / s0) * (num / denom);
}

}  // namespace detail

// Global Moran's I with a permutation test. p is one-sided toward the sign
// of the observed statistic with the +1 continuity correction; z is taken
// against the permutation distribution.
inline MoransResult morans_i(const std::vector<double>& values,
                             const std::vector<std::vector<int>>& neighbors,
                             int permutations = 999, std::uint64_t seed = 1) {
  std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("need at least two counties");
  if (neighbors.size() != n)
    throw std::invalid_argument("adjacency size mismatch");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) throw std::invalid_argument("constant values, zero variance");
  bool any_edge = false;
  for (const auto& nb : neighbors) any_edge = any_edge || !nb.empty();
  if (!any_edge) throw std::invalid_argument("no adjacency edges");

  MoransResult r;
  r.moran_i = detail::moran_statistic(values, neighbors);
  r.permutations = permutations;

  Rng rng(seed);
  std::vector<double> perm = values;
  std::vector<double> stats(static_cast<std::size_t>(permutations));
  int as_extreme = 0;
  double mean_s = 0;
  for (int k = 0; k < permutations; ++k) {
    rng.shuffle(perm);
    double s = detail::moran_statistic(perm, neighbors);
    stats[static_cast<std::size_t>(k)] = s;
    mean_s += s;
    if (r.moran_i >= 0 ? s >= r.moran_i : s <= r.moran_i) ++as_extreme;
  }
  mean_s /= permutations;
  double var_s = 0;
  for (double s : stats) var_s += (s - mean_s) * (s - mean_s);
  var_s /= permutations > 1 ? permutations - 1 : 1;
  r.p = (1.0 + as_extreme) / (permutations + 1.0);
  r.z = var_s > 0 ? (r.moran_i - mean_s) / std::sqrt(var_s) : 0.0;
  return r;
}

// Sample autocorrelation about the full-series mean.
inline std::vector<double> acf(const std::vector<double>& y,
                               const std::vector<int>& lags) {
  int max_lag = 0;
  for (int l : lags) max_lag = std::max(max_lag, l);
  if (y.size() < static_cast<std::size_t>(max_lag) + 2)
    throw std::invalid_argument("series too short for requested lags");
  double ybar = 0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  double denom = 0;
  for (double v : y) denom += (v - ybar) * (v - ybar);
  if (denom == 0) throw std::invalid_argument("constant series");
  std::vector<double> out;
  out.reserve(lags.size());
  for (int l : lags) {
    double num = 0;
    for (std::size_t t = 0; t + static_cast<std::size_t>(l) < y.size(); ++t)
      num += (y[t] - ybar) * (y[t + static_cast<std::size_t>(l)] - ybar);
    out.push_back(num / denom);
  }
  return out;
}

}  // namespace stormcast::eval
