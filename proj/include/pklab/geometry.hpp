#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pklab/grid.hpp"
#include "pklab/quadrature.hpp"
#include "pklab/vec.hpp"

namespace pklab {

struct Hyperplane {
  Vec3 point;
  Vec3 normal;  // unit

  double height(Vec3 p) const { return dot(p - point, normal); }
};

struct PointSet {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
};

// Largest distance from a point of `from` to the set `to`.
inline double one_sided_deviation(const PointSet& from, const PointSet& to) {
  if (from.points.empty()) return 0.0;
  if (to.points.empty())
    throw std::invalid_argument("one_sided_deviation: empty target set");
  SpatialGrid index(to.points);
  double worst = 0.0;
  for (const Vec3& p : from.points)
    worst = std::max(worst, index.nearest(p).distance);
  return worst;
}

// Sum of the two one-sided deviations (not their max). Symmetric; zero only
// when the sets coincide as sets.
inline double hausdorff_distance(const PointSet& a, const PointSet& b) {
  return one_sided_deviation(a, b) + one_sided_deviation(b, a);
}

inline PointSet clip_to_ball(const PointSet& set, Vec3 center, double r) {
  PointSet out;
  double r2 = r * r;
  for (const Vec3& p : set.points)
    if (dist2(p, center) <= r2) out.points.push_back(p);
  return out;
}

// Square grid of spacing <= resolution covering the disc L cap B(center, r).
// The plane need not pass through the center; the disc is centered at the
// projection of `center` onto the plane.
inline PointSet plane_sample(const Hyperplane& plane, Vec3 center, double r,
                             double resolution) {
  if (resolution <= 0.0) throw std::invalid_argument("plane_sample: resolution <= 0");
  PointSet out;
  double h = plane.height(center);
  if (std::abs(h) >= r) return out;
  Vec3 disc_center = center - h * plane.normal;
  double disc_r = std::sqrt(r * r - h * h);
  auto [u, v] = tangent_basis(plane.normal);
  int m = int(std::ceil(disc_r / resolution));
  double step = disc_r / m;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) {
      double a = i * step, b = j * step;
      if (a * a + b * b > disc_r * disc_r) continue;
      out.points.push_back(disc_center + a * u + b * v);
    }
  return out;
}

// Distance from a point to the closed disc of radius `disc_r` centered at
// `c` in the plane with unit normal `nu`.
inline double distance_to_disc(Vec3 p, Vec3 c, Vec3 nu, double disc_r) {
  Vec3 d = p - c;
  double perp = dot(d, nu);
  Vec3 in_plane = d - perp * nu;
  double par = norm(in_plane);
  if (par <= disc_r) return std::abs(perp);
  double over = par - disc_r;
  return std::sqrt(perp * perp + over * over);
}

namespace detail {

// Jacobi eigensolver for a symmetric 3x3 matrix; returns eigenvalues
// ascending with matching unit eigenvectors as columns.
inline void symmetric_eigen3(std::array<std::array<double, 3>, 3> m,
                             std::array<double, 3>& eval,
                             std::array<Vec3, 3>& evec) {
  std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 32; ++sweep) {
    double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
    if (off < 1e-15) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(m[p][q]) < 1e-18) continue;
        double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < 3; ++k) {
          double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - s * mkq;
          m[k][q] = s * mkp + c * mkq;
        }
        for (int k = 0; k < 3; ++k) {
          double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - s * mqk;
          m[q][k] = s * mpk + c * mqk;
        }
        for (int k = 0; k < 3; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::array<int, 3> idx{0, 1, 2};
  std::array<double, 3> d{m[0][0], m[1][1], m[2][2]};
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });
  for (int k = 0; k < 3; ++k) {
    eval[k] = d[idx[k]];
    evec[k] = normalized(Vec3{v[0][idx[k]], v[1][idx[k]], v[2][idx[k]]});
  }
}

}  // namespace detail

// Least-squares plane through `anchor`: normal is the smallest principal
// direction of the anchored covariance.
inline Hyperplane fit_plane(const PointSet& set, Vec3 anchor) {
  if (set.points.size() < 3)
    throw std::invalid_argument("fit_plane: need at least 3 points");
  std::array<std::array<double, 3>, 3> cov{};
  for (const Vec3& p : set.points) {
    Vec3 d = p - anchor;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) cov[i][j] += d[i] * d[j];
  }
  std::array<double, 3> eval;
  std::array<Vec3, 3> evec;
  detail::symmetric_eigen3(cov, eval, evec);
  Vec3 nu = evec[0];
  // Orient away from the patch centroid so curved caps get an outward-ish
  // normal; callers with a real orientation reference re-orient themselves.
  Vec3 centroid{};
  for (const Vec3& p : set.points) centroid += p;
  centroid = centroid / double(set.points.size());
  if (dot(nu, anchor - centroid) < 0.0) nu = -nu;
  return {anchor, nu};
}

struct ThetaConfig {
  double resolution = 0.0;      // plane grid spacing; 0 => r / 24
  double sample_spacing = 0.0;  // covering radius of the boundary samples
  int coarse_starts = 16;       // extra normal directions besides PCA
  double improve_tol = 1e-4;    // stop refining below this gain
  // Clips larger than this are strided down before the search; the thinned
  // covering radius enters the slack. Zero disables thinning.
  int clip_budget = 3000;
};

struct ThetaResult {
  double theta = 0.0;
  double slack = 0.0;  // (sample_spacing + resolution) / r
  Vec3 normal{};
  int clip_count = 0;
  bool degenerate = false;  // fewer than 16 points in the clip
};

namespace detail {

// Sum-form deviation between a boundary clip and the disc of the plane
// through q with normal nu, normalized by r. The clip side uses the exact
// disc distance; the disc side walks a sample grid against the clip.
inline double theta_objective(const std::vector<Vec3>& clip,
                              const SpatialGrid& clip_index, Vec3 q, Vec3 nu,
                              double r, double resolution) {
  double sup_clip = 0.0;
  for (const Vec3& p : clip)
    sup_clip = std::max(sup_clip, distance_to_disc(p, q, nu, r));
  double sup_disc = 0.0;
  auto [u, v] = tangent_basis(nu);
  int m = int(std::ceil(r / resolution));
  double step = r / m;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) {
      double a = i * step, b = j * step;
      if (a * a + b * b > r * r) continue;
      Vec3 p = q + a * u + b * v;
      sup_disc = std::max(sup_disc, clip_index.nearest(p).distance);
    }
  return (sup_clip + sup_disc) / r;
}

}  // namespace detail

// Flatness ratio at (q, r): minimal normalized sum-deviation between the
// boundary points inside B(q, r) and a disc through q, over plane normals.
// Search = PCA start plus coarse directions, then local descent; the result
// never exceeds the PCA-plane value.
inline ThetaResult theta_flatness(const PointSet& boundary, Vec3 q, double r,
                                  ThetaConfig cfg = {}) {
  if (r <= 0.0) throw std::invalid_argument("theta_flatness: r <= 0");
  double resolution = cfg.resolution > 0.0 ? cfg.resolution : r / 24.0;
  ThetaResult out;

  PointSet clip = clip_to_ball(boundary, q, r);
  out.clip_count = int(clip.size());
  double spacing_eff = cfg.sample_spacing;
  if (cfg.clip_budget > 0 && clip.size() > std::size_t(cfg.clip_budget)) {
    std::size_t stride =
        (clip.size() + cfg.clip_budget - 1) / cfg.clip_budget;
    PointSet thinned;
    for (std::size_t i = 0; i < clip.size(); i += stride)
      thinned.points.push_back(clip.points[i]);
    // Keeping one point in `stride` grows the covering radius by about
    // sqrt(stride); fall back to an area estimate when none was given.
    double base = spacing_eff > 0.0
                      ? spacing_eff
                      : 2.2 * r / std::sqrt(double(clip.size()));
    spacing_eff = base * std::sqrt(double(stride));
    clip = std::move(thinned);
  }
  out.slack = (spacing_eff + resolution) / r;
  if (clip.size() < 16) {
    out.degenerate = true;
    if (clip.size() < 3) {
      out.theta = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
  }
  SpatialGrid clip_index(clip.points);

  auto objective = [&](Vec3 nu, double res) {
    return detail::theta_objective(clip.points, clip_index, q, nu, r, res);
  };

  Vec3 pca = fit_plane(clip, q).normal;
  double coarse_res = std::max(resolution, r / 12.0);
  std::vector<Vec3> starts{pca};
  for (const Vec3& d : fibonacci_sphere(cfg.coarse_starts))
    starts.push_back(d.z < 0.0 ? -d : d);

  std::vector<std::pair<double, Vec3>> ranked;
  for (const Vec3& s : starts) ranked.emplace_back(objective(s, coarse_res), s);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  double best = std::numeric_limits<double>::infinity();
  Vec3 best_nu = ranked.front().second;
  int refine = std::min<std::size_t>(3, ranked.size());
  for (int s = 0; s < refine; ++s) {
    Vec3 nu = ranked[s].second;
    double val = objective(nu, resolution);
    double step = 0.1;
    while (step > 1e-3) {
      auto [u, v] = tangent_basis(nu);
      bool improved = false;
      for (Vec3 dir : {u, v, -u, -v}) {
        Vec3 cand = normalized(nu + step * dir);
        double cv = objective(cand, resolution);
        if (cv < val - cfg.improve_tol) {
          val = cv;
          nu = cand;
          improved = true;
        }
      }
      if (!improved) step *= 0.5;
    }
    if (val < best) {
      best = val;
      best_nu = nu;
    }
  }
  // The PCA plane at full resolution is an admissible candidate; never
  // report anything above it.
  double pca_val = objective(pca, resolution);
  if (pca_val < best) {
    best = pca_val;
    best_nu = pca;
  }
  out.theta = best;
  out.normal = best_nu;
  return out;
}

struct ProfileRow {
  int center_index = 0;
  double radius = 0.0;
  double theta = 0.0;
  double slack = 0.0;
  Vec3 normal{};
  bool degenerate = false;
};

inline std::vector<ProfileRow> flatness_profile(const PointSet& boundary,
                                                const std::vector<Vec3>& centers,
                                                const std::vector<double>& radii,
                                                ThetaConfig cfg = {}) {
  std::vector<ProfileRow> rows;
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (double r : radii) {
      ThetaResult t = theta_flatness(boundary, centers[c], r, cfg);
      rows.push_back({int(c), r, t.theta, t.slack, t.normal, t.degenerate});
    }
  return rows;
}

}  // namespace pklab
