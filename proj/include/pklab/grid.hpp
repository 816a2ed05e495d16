#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pklab/vec.hpp"

namespace pklab {

// Uniform-cell spatial index over a fixed point set. Queries are exact:
// nearest() expands cell shells until no closer point can exist, and
// within_radius() filters candidate cells by true distance. Point sets
// smaller than kBruteForceLimit skip the grid entirely.
class SpatialGrid {
 public:
  static constexpr std::size_t kBruteForceLimit = 512;

  SpatialGrid() = default;

  explicit SpatialGrid(std::vector<Vec3> points, double cell_hint = 0.0)
      : pts_(std::move(points)) {
    if (pts_.empty()) throw std::invalid_argument("SpatialGrid: empty point set");
    if (pts_.size() < kBruteForceLimit) return;

    Vec3 lo = pts_[0], hi = pts_[0];
    for (const Vec3& p : pts_) {
      for (int c = 0; c < 3; ++c) {
        lo[c] = std::min(lo[c], p[c]);
        hi[c] = std::max(hi[c], p[c]);
      }
    }
    double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-12});
    // Default cell targets a few points per occupied cell for a surface-like
    // distribution; a caller hint (e.g. sample spacing) overrides it.
    double cell = cell_hint > 0.0 ? cell_hint
                                  : extent / std::cbrt(double(pts_.size())) * 0.5;
    cell = std::max(cell, extent / 160.0);
    lo_ = lo - Vec3{cell, cell, cell} * 0.5;
    cell_ = cell;
    for (int c = 0; c < 3; ++c) {
      int n = int(std::floor((hi[c] - lo_[c]) / cell)) + 2;
      dims_[c] = std::max(1, n);
    }

    std::vector<int> counts(std::size_t(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
    std::vector<int> cell_of(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      cell_of[i] = cell_index(coords(pts_[i]));
      ++counts[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
    start_ = counts;
    order_.resize(pts_.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts_.size(); ++i) order_[fill[cell_of[i]]++] = int(i);
  }

  const std::vector<Vec3>& points() const { return pts_; }
  std::size_t size() const { return pts_.size(); }

  struct Hit {
    int index = -1;
    double distance = std::numeric_limits<double>::infinity();
  };

  Hit nearest(Vec3 q) const {
    Hit best;
    if (start_.empty()) {
      for (std::size_t i = 0; i < pts_.size(); ++i) {
        double d2 = dist2(pts_[i], q);
        if (d2 < best.distance) best.distance = d2, best.index = int(i);
      }
      best.distance = std::sqrt(best.distance);
      return best;
    }
    auto [qx, qy, qz] = coords(q);
    double best2 = std::numeric_limits<double>::infinity();
    for (int shell = 0;; ++shell) {
      // Any point in shell k lies at distance >= (k-1)*cell from q.
      double reach = double(shell - 1) * cell_;
      if (best.index >= 0 && reach > 0.0 && reach * reach > best2) break;
      bool any_cell = visit_shell(qx, qy, qz, shell, [&](int c) {
        for (int s = start_[c]; s < start_[c + 1]; ++s) {
          int i = order_[s];
          double d2 = dist2(pts_[i], q);
          if (d2 < best2 || (d2 == best2 && i < best.index)) {
            best2 = d2;
            best.index = i;
          }
        }
      });
      if (!any_cell && best.index >= 0) break;
      if (!any_cell && shell > dims_[0] + dims_[1] + dims_[2]) break;
    }
    best.distance = std::sqrt(best2);
    return best;
  }

  // Indices of all points within `r` of q, ascending.
  std::vector<int> within_radius(Vec3 q, double r) const {
    std::vector<int> out;
    double r2 = r * r;
    if (start_.empty()) {
      for (std::size_t i = 0; i < pts_.size(); ++i)
        if (dist2(pts_[i], q) <= r2) out.push_back(int(i));
      return out;
    }
    auto clamp_lo = [&](double v, int c) {
      return std::clamp(int(std::floor((v - lo_[c]) / cell_)), 0, dims_[c] - 1);
    };
    int x0 = clamp_lo(q.x - r, 0), x1 = clamp_lo(q.x + r, 0);
    int y0 = clamp_lo(q.y - r, 1), y1 = clamp_lo(q.y + r, 1);
    int z0 = clamp_lo(q.z - r, 2), z1 = clamp_lo(q.z + r, 2);
    for (int x = x0; x <= x1; ++x)
      for (int y = y0; y <= y1; ++y)
        for (int z = z0; z <= z1; ++z) {
          int c = (x * dims_[1] + y) * dims_[2] + z;
          for (int s = start_[c]; s < start_[c + 1]; ++s) {
            int i = order_[s];
            if (dist2(pts_[i], q) <= r2) out.push_back(i);
          }
        }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::array<int, 3> coords(Vec3 p) const {
    std::array<int, 3> c;
    for (int k = 0; k < 3; ++k)
      c[k] = std::clamp(int(std::floor((p[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
    return c;
  }

  int cell_index(std::array<int, 3> c) const {
    return (c[0] * dims_[1] + c[1]) * dims_[2] + c[2];
  }

  // Visit all grid cells whose Chebyshev distance from (qx,qy,qz) is exactly
  // `shell`. Returns false when the whole shell is outside the grid.
  template <typename Fn>
  bool visit_shell(int qx, int qy, int qz, int shell, Fn&& fn) const {
    if (shell == 0) {
      if (qx < 0 || qx >= dims_[0] || qy < 0 || qy >= dims_[1] || qz < 0 ||
          qz >= dims_[2])
        return false;
      fn(cell_index({qx, qy, qz}));
      return true;
    }
    bool any = false;
    auto emit = [&](int x, int y, int z) {
      if (x < 0 || x >= dims_[0] || y < 0 || y >= dims_[1] || z < 0 ||
          z >= dims_[2])
        return;
      any = true;
      fn(cell_index({x, y, z}));
    };
    for (int x = qx - shell; x <= qx + shell; ++x)
      for (int y = qy - shell; y <= qy + shell; ++y) {
        bool face = (std::abs(x - qx) == shell) || (std::abs(y - qy) == shell);
        if (face) {
          for (int z = qz - shell; z <= qz + shell; ++z) emit(x, y, z);
        } else {
          emit(x, y, qz - shell);
          emit(x, y, qz + shell);
        }
      }
    return any;
  }

  std::vector<Vec3> pts_;
  Vec3 lo_{};
  double cell_ = 0.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<int> start_;  // CSR offsets per cell; empty => brute force
  std::vector<int> order_;
};

}  // namespace pklab
