#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <vector>

#include "stormcast/core.hpp"

namespace stormcast {

struct Point2 {
  double x = 0;
  double y = 0;
};

inline double dist2(const Point2& a, const Point2& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double dist(const Point2& a, const Point2& b) {
  return std::sqrt(dist2(a, b));
}

// Local equirectangular projection (meters) about a reference point.
// Adequate at state scale; kriging only needs Euclidean distances in a
// projected CRS, not an exact geodesic.
class LocalProjection {
 public:
  LocalProjection(double lon0_deg, double lat0_deg)
      : lon0_(lon0_deg), lat0_(lat0_deg),
        coslat0_(std::cos(lat0_deg * kDegToRad)) {}

  // Centroid of a lon/lat cloud.
  static LocalProjection about(const std::vector<double>& lon,
                               const std::vector<double>& lat) {
    double mlon = 0, mlat = 0;
    for (std::size_t i = 0; i < lon.size(); ++i) {
      mlon += lon[i];
      mlat += lat[i];
    }
    double n = std::max<std::size_t>(lon.size(), 1);
    return LocalProjection(mlon / n, mlat / n);
  }

  Point2 to_xy(double lon_deg, double lat_deg) const {
    return {kEarthRadius * (lon_deg - lon0_) * kDegToRad * coslat0_,
            kEarthRadius * (lat_deg - lat0_) * kDegToRad};
  }

 private:
  static constexpr double kDegToRad = 0.017453292519943295;
  static constexpr double kEarthRadius = 6371000.0;

  double lon0_, lat0_, coslat0_;
};

// 2-d k-d tree over a fixed point set. Ties on distance resolve to the
// lower point index so queries are deterministic.
class KdTree2 {
 public:
  KdTree2() = default;

  explicit KdTree2(std::vector<Point2> pts) : pts_(std::move(pts)) {
    idx_.resize(pts_.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    if (!idx_.empty()) root_ = build(0, idx_.size(), 0);
  }

  std::size_t size() const { return pts_.size(); }
  const Point2& point(std::size_t i) const { return pts_[i]; }

  // Nearest point to q, skipping index `exclude` (-1 for none).
  // Returns -1 when empty. Distance out-param is optional.
  int nearest(const Point2& q, int exclude = -1, double* out_d = nullptr) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_rec(root_, q, exclude, best, best_d2);
    if (out_d && best >= 0) *out_d = std::sqrt(best_d2);
    return best;
  }

  // Indices with distance <= radius, sorted by (distance, index).
  std::vector<int> within_radius(const Point2& q, double radius,
                                 int exclude = -1) const {
    std::vector<std::pair<double, int>> hits;
    radius_rec(root_, q, radius * radius, exclude, hits);
    std::sort(hits.begin(), hits.end());
    std::vector<int> out;
    out.reserve(hits.size());
    for (auto& [d2, i] : hits) out.push_back(i);
    return out;
  }

  // k nearest indices sorted by (distance, index).
  std::vector<int> k_nearest(const Point2& q, std::size_t k,
                             int exclude = -1) const {
    std::vector<std::pair<double, int>> all;
    all.reserve(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (static_cast<int>(i) == exclude) continue;
      all.emplace_back(dist2(q, pts_[i]), static_cast<int>(i));
    }
    std::size_t kk = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + kk, all.end());
    std::vector<int> out;
    out.reserve(kk);
    for (std::size_t i = 0; i < kk; ++i) out.push_back(all[i].second);
    return out;
  }

 private:
  struct Node {
    int point = -1;
    int left = -1;
    int right = -1;
    int axis = 0;
  };

  int build(std::size_t lo, std::size_t hi, int axis) {
    if (lo >= hi) return -1;
    std::size_t mid = (lo + hi) / 2;
    auto cmp = [&](int a, int b) {
      double va = axis == 0 ? pts_[a].x : pts_[a].y;
      double vb = axis == 0 ? pts_[b].x : pts_[b].y;
      return va < vb || (va == vb && a < b);
    };
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     cmp);
    Node n;
    n.point = idx_[mid];
    n.axis = axis;
    int self = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    int l = build(lo, mid, 1 - axis);
    int r = build(mid + 1, hi, 1 - axis);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void nearest_rec(int node, const Point2& q, int exclude, int& best,
                   double& best_d2) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Point2& p = pts_[n.point];
    if (n.point != exclude) {
      double d2 = dist2(q, p);
      if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
        best_d2 = d2;
        best = n.point;
      }
    }
    double delta = (n.axis == 0 ? q.x - p.x : q.y - p.y);
    int near = delta <= 0 ? n.left : n.right;
    int far = delta <= 0 ? n.right : n.left;
    nearest_rec(near, q, exclude, best, best_d2);
    if (delta * delta <= best_d2) nearest_rec(far, q, exclude, best, best_d2);
  }

  void radius_rec(int node, const Point2& q, double r2, int exclude,
                  std::vector<std::pair<double, int>>& hits) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Point2& p = pts_[n.point];
    double d2 = dist2(q, p);
    if (n.point != exclude && d2 <= r2) hits.emplace_back(d2, n.point);
    double delta = (n.axis == 0 ? q.x - p.x : q.y - p.y);
    int near = delta <= 0 ? n.left : n.right;
    int far = delta <= 0 ? n.right : n.left;
    radius_rec(near, q, r2, exclude, hits);
    if (delta * delta <= r2) radius_rec(far, q, r2, exclude, hits);
  }

  std::vector<Point2> pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace stormcast
