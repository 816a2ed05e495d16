#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pklab/constants.hpp"
#include "pklab/geometry.hpp"
#include "pklab/grid.hpp"
#include "pklab/harmonics.hpp"
#include "pklab/quadrature.hpp"
#include "pklab/vec.hpp"

namespace pklab {

struct Mode {
  int degree = 0;
  int order = 0;
  double coeff = 0.0;
};

// Weighted boundary sample with outward normals. Weights carry the local
// surface measure, so summing them over a subset estimates that subset's
// area. `spacing` bounds the covering radius of the sample over the patch
// it was drawn from.
struct BoundaryCloud {
  PointSet points;
  std::vector<Vec3> normals;
  std::vector<double> weights;
  double spacing = 0.0;

  std::size_t size() const { return points.size(); }
};

// Star-shaped domain about the origin given by a radial graph
// r(w) = scale * base * (1 + sum_i c_i Y_i(w)) over unit directions w.
// The mode coefficients are stored pre-normalized so that the perturbation
// term has sup-norm equal to the requested amplitude.
class StarDomain {
 public:
  static StarDomain ball(double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("ball: radius <= 0");
    StarDomain d;
    d.base_radius_ = radius;
    d.refresh_stats();
    return d;
  }

  // Perturbation profile sum(coeff * Y_lm), rescaled so its sup over the
  // sphere equals `amplitude`. Large amplitudes are refused: the radial
  // graph analysis assumes the boundary stays a small perturbation of the
  // sphere.
  static StarDomain perturbed_ball(double base_radius,
                                   const std::vector<Mode>& modes,
                                   double amplitude) {
    if (!(base_radius > 0.0))
      throw std::invalid_argument("perturbed_ball: base radius <= 0");
    if (!(amplitude >= 0.0) || amplitude >= 0.3)
      throw std::invalid_argument("perturbed_ball: amplitude outside [0, 0.3)");
    for (const Mode& m : modes)
      if (m.degree < 0 || std::abs(m.order) > m.degree)
        throw std::invalid_argument("perturbed_ball: invalid mode indices");

    StarDomain d;
    d.base_radius_ = base_radius;
    if (amplitude > 0.0 && !modes.empty()) {
      double sup = 0.0;
      for (int i = 0; i < kStatsGrid; ++i) {
        Vec3 w = fibonacci_direction(i, kStatsGrid);
        double f = 0.0;
        for (const Mode& m : modes)
          f += m.coeff * real_sph_harm(m.degree, m.order, w);
        sup = std::max(sup, std::abs(f));
      }
      if (sup > 0.0) {
        d.modes_ = modes;
        for (Mode& m : d.modes_) m.coeff *= amplitude / sup;
        d.amplitude_ = amplitude;
      }
    }
    d.refresh_stats();
    return d;
  }

  double radius(const Vec3& dir) const {
    double f = 1.0;
    for (const Mode& m : modes_)
      f += m.coeff * real_sph_harm(m.degree, m.order, dir);
    return scale_ * base_radius_ * f;
  }

  // Tangential gradient of the radius over the unit sphere.
  Vec3 radius_gradient(const Vec3& dir) const {
    Vec3 g{0, 0, 0};
    for (const Mode& m : modes_) {
      double value = 0.0;
      Vec3 gm{0, 0, 0};
      real_sph_harm_grad(m.degree, m.order, dir, value, gm);
      g += m.coeff * gm;
    }
    return scale_ * base_radius_ * g;
  }

  double scale() const { return scale_; }
  double amplitude() const { return amplitude_; }
  const std::vector<Mode>& modes() const { return modes_; }
  double base_radius() const { return base_radius_; }

  // Sharp grid extremes of the radial profile.
  double min_radius() const { return rmin_; }
  double max_radius() const { return rmax_; }
  // One-sided bounds valid for every direction, not just grid nodes.
  double min_radius_bound() const { return rmin_cert_; }
  double max_radius_bound() const { return rmax_cert_; }
  // Upper bound on |surface gradient of the radius| over all directions.
  double gradient_sup_bound() const { return gsup_cert_; }

  double surface_area(int n_theta = 128, int n_phi = 256) const {
    SphereQuad q = sphere_tensor_quad(n_theta, n_phi);
    double area = 0.0;
    for (std::size_t k = 0; k < q.dirs.size(); ++k) {
      double r = radius(q.dirs[k]);
      Vec3 g = radius_gradient(q.dirs[k]);
      area += q.weights[k] * r * std::sqrt(r * r + norm2(g));
    }
    return area;
  }

  // Rescale so the total boundary area equals one. All derived geometry
  // (radii, spacing, heights) scales linearly with the factor.
  StarDomain normalized(const DimensionConstants& dims) const {
    double area = surface_area();
    StarDomain d = *this;
    double s = std::pow(area, -1.0 / dims.n);
    d.scale_ *= s;
    d.rmin_ *= s;
    d.rmax_ *= s;
    d.rmin_cert_ *= s;
    d.rmax_cert_ *= s;
    d.gsup_cert_ *= s;
    return d;
  }

  bool contains(const Vec3& x) const {
    double rho = norm(x);
    if (rho == 0.0) return true;
    return rho < radius(x / rho);
  }

  // Radial gap to the boundary along the ray through x; positive outside.
  double signed_height(const Vec3& x) const {
    double rho = norm(x);
    if (rho == 0.0) return -rmin_;
    return rho - radius(x / rho);
  }

  BoundaryCloud sample_boundary(int count) const {
    if (count < 16) throw std::invalid_argument("sample_boundary: count < 16");
    BoundaryCloud cloud;
    cloud.points.points.reserve(count);
    cloud.normals.reserve(count);
    cloud.weights.reserve(count);
    const double cell = 4.0 * M_PI / count;
    for (int i = 0; i < count; ++i) {
      Vec3 w = fibonacci_direction(i, count);
      double r = radius(w);
      Vec3 g = radius_gradient(w);
      cloud.points.points.push_back(r * w);
      cloud.normals.push_back(pklab::normalized(r * w - g));
      cloud.weights.push_back(cell * r * std::sqrt(r * r + norm2(g)));
    }
    // Empirical covering radius: probe with a denser rotated node set and
    // inflate. The rotation keeps probe nodes off the sample nodes.
    SpatialGrid grid(cloud.points.points);
    int probes = 2 * count + 1;
    double worst = 0.0;
    const double c = std::cos(1.0), s = std::sin(1.0);
    for (int i = 0; i < probes; ++i) {
      Vec3 w = fibonacci_direction(i, probes);
      Vec3 v{c * w.x - s * w.y, s * w.x + c * w.y, w.z};
      worst = std::max(worst, grid.nearest(radius(v) * v).distance);
    }
    cloud.spacing = 1.25 * worst;
    return cloud;
  }

  // Boundary samples restricted to directions within `chord_reach` of `dir`
  // on the unit sphere, at the density of a global set of
  // `global_equivalent` nodes. Lets flatness probes reach high local density
  // without paying for a global cloud.
  BoundaryCloud sample_boundary_cap(const Vec3& dir, double chord_reach,
                                    int global_equivalent) const {
    if (global_equivalent < 16)
      throw std::invalid_argument("sample_boundary_cap: grid too small");
    Vec3 d0 = pklab::normalized(dir);
    BoundaryCloud cloud;
    const double cell = 4.0 * M_PI / global_equivalent;
    const double reach2 = chord_reach * chord_reach;
    double stretch = 0.0;
    for (int i = 0; i < global_equivalent; ++i) {
      Vec3 w = fibonacci_direction(i, global_equivalent);
      if (dist2(w, d0) > reach2) continue;
      double r = radius(w);
      Vec3 g = radius_gradient(w);
      cloud.points.points.push_back(r * w);
      cloud.normals.push_back(pklab::normalized(r * w - g));
      cloud.weights.push_back(cell * r * std::sqrt(r * r + norm2(g)));
      stretch = std::max(stretch, std::sqrt(r * r + norm2(g)));
    }
    // Node spacing on the sphere times the radial-graph stretch bounds the
    // covering radius of the mapped patch.
    cloud.spacing =
        1.3 * std::sqrt(4.0 * M_PI / global_equivalent) * stretch;
    return cloud;
  }

 private:
  static constexpr int kStatsGrid = 65536;

  void refresh_stats() {
    if (modes_.empty()) {
      rmin_ = rmax_ = rmin_cert_ = rmax_cert_ = scale_ * base_radius_;
      gsup_cert_ = 0.0;
      return;
    }
    double smin = 1e300, smax = -1e300, gmax = 0.0;
    for (int i = 0; i < kStatsGrid; ++i) {
      Vec3 w = fibonacci_direction(i, kStatsGrid);
      double f = 1.0;
      Vec3 g{0, 0, 0};
      for (const Mode& m : modes_) {
        double value = 0.0;
        Vec3 gm{0, 0, 0};
        real_sph_harm_grad(m.degree, m.order, w, value, gm);
        f += m.coeff * value;
        g += m.coeff * gm;
      }
      smin = std::min(smin, f);
      smax = std::max(smax, f);
      gmax = std::max(gmax, norm(g));
    }
    double h = 1.2 * std::sqrt(4.0 * M_PI / kStatsGrid);
    double pad = 1.3 * gmax * h;
    double rb = scale_ * base_radius_;
    rmin_ = rb * smin;
    rmax_ = rb * smax;
    rmin_cert_ = rb * (smin - pad);
    rmax_cert_ = rb * (smax + pad);
    gsup_cert_ = rb * 1.3 * gmax;
    if (!(rmin_cert_ > 0.0))
      throw std::invalid_argument("domain: perturbation kills star shape");
  }

  double base_radius_ = 1.0;
  double amplitude_ = 0.0;
  std::vector<Mode> modes_;
  double scale_ = 1.0;
  double rmin_ = 0.0, rmax_ = 0.0, rmin_cert_ = 0.0, rmax_cert_ = 0.0;
  double gsup_cert_ = 0.0;
};

struct AhlforsRow {
  double radius = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double slack = 0.0;
};

// Surface mass of boundary balls against omega_n r^n, over a deterministic
// spread of centers. The slack covers membership uncertainty in the band of
// width `spacing` around each cutting sphere.
inline std::vector<AhlforsRow> ahlfors_ratios(
    const BoundaryCloud& cloud, const DimensionConstants& dims,
    const std::vector<double>& radii, int center_count) {
  if (cloud.size() == 0) throw std::invalid_argument("ahlfors: empty cloud");
  if (center_count < 1) throw std::invalid_argument("ahlfors: no centers");
  SpatialGrid grid(cloud.points.points);
  std::size_t stride = std::max<std::size_t>(1, cloud.size() / center_count);
  std::vector<AhlforsRow> rows;
  for (double r : radii) {
    if (!(r > 0.0)) throw std::invalid_argument("ahlfors: radius <= 0");
    AhlforsRow row;
    row.radius = r;
    row.lo = 1e300;
    row.hi = -1e300;
    row.slack = 4.0 * cloud.spacing / r;
    double denom = dims.omega_n * std::pow(r, dims.n);
    for (std::size_t c = 0; c < cloud.size(); c += stride) {
      double mass = 0.0;
      for (int id : grid.within_radius(cloud.points.points[c], r))
        mass += cloud.weights[id];
      double ratio = mass / denom;
      row.lo = std::min(row.lo, ratio);
      row.hi = std::max(row.hi, ratio);
    }
    rows.push_back(row);
  }
  return rows;
}

struct OscillationRow {
  double scale = 0.0;
  double worst = 0.0;
  Vec3 worst_center{0, 0, 0};
  double slack = 0.0;
};

// Root mean square deviation of the outward normal from its mean over
// boundary balls of the given scale, maximized over a center spread. For a
// sphere of radius R this grows like scale / (R sqrt(2)).
inline OscillationRow normal_oscillation(const BoundaryCloud& cloud,
                                         double scale, int center_count) {
  if (cloud.size() == 0)
    throw std::invalid_argument("oscillation: empty cloud");
  if (!(scale > 0.0)) throw std::invalid_argument("oscillation: scale <= 0");
  SpatialGrid grid(cloud.points.points);
  std::size_t stride = std::max<std::size_t>(1, cloud.size() / center_count);
  OscillationRow row;
  row.scale = scale;
  for (std::size_t c = 0; c < cloud.size(); c += stride) {
    std::vector<int> ids = grid.within_radius(cloud.points.points[c], scale);
    if (ids.size() < 8) continue;
    double mass = 0.0;
    Vec3 mean{0, 0, 0};
    for (int id : ids) {
      mass += cloud.weights[id];
      mean += cloud.weights[id] * cloud.normals[id];
    }
    mean = (1.0 / mass) * mean;
    double second = 0.0;
    for (int id : ids) second += cloud.weights[id] * dist2(cloud.normals[id], mean);
    double osc = std::sqrt(second / mass);
    if (osc > row.worst) {
      row.worst = osc;
      row.worst_center = cloud.points.points[c];
    }
  }
  row.slack = 2.0 * cloud.spacing * row.worst / scale;
  return row;
}

}  // namespace pklab
