#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pklab/constants.hpp"
#include "pklab/domain.hpp"
#include "pklab/flatness.hpp"
#include "pklab/green.hpp"
#include "pklab/quadrature.hpp"
#include "pklab/vec.hpp"
#include "pklab/wos.hpp"

namespace pklab {

// Quantitative consequences of an almost-constant exit density, phrased as
// one-sided checks: each passes when measured <= bound + slack. The margin
// keeps the sign of the headroom, and `applicable` goes false when a
// precondition or a resolution floor rules the check out rather than
// failing it.

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  double margin = 0.0;
  bool pass = false;
  bool applicable = true;
  std::string note;  // free-form qualifiers: certified scales, coarsening
};

inline CheckResult make_check(std::string name, double measured, double bound,
                              double slack) {
  CheckResult c;
  c.name = std::move(name);
  c.measured = measured;
  c.bound = bound;
  c.slack = slack;
  c.margin = bound + slack - measured;
  c.pass = c.margin >= 0.0;
  return c;
}

// Flatness scale implied by a log-density oscillation of eps: beyond it the
// implied plane bands are no longer thin.
inline double tau_from_eps(double eps) {
  return std::pow(std::expm1(2.0 * eps), 0.25);
}

inline double rho_from_eps(double eps, double r1) {
  return std::sqrt(2.0 * std::expm1(2.0 * eps)) * r1;
}

// Total mass one forces the domain between the balls whose radii carry unit
// measure up to the density oscillation: exp(-eps) <= sigma_n r1^n and
// sigma_n r2^n <= exp(eps). Sharp grid radii feed the measured defect and
// the certified pads feed the slack.
inline CheckResult kernel_sandwich_check(const StarDomain& domain,
                                         const DimensionConstants& dims,
                                         double eps_hat, double eps_floor) {
  double n = double(dims.n);
  double v1 = dims.sigma_n * std::pow(domain.min_radius(), n);
  double v2 = dims.sigma_n * std::pow(domain.max_radius(), n);
  double v1_pad = dims.sigma_n * std::pow(domain.min_radius_bound(), n);
  double v2_pad = dims.sigma_n * std::pow(domain.max_radius_bound(), n);
  double defect =
      std::max(std::exp(-eps_hat) - v1, v2 - std::exp(eps_hat));
  double slack = (v1 - v1_pad) + (v2_pad - v2) +
                 std::expm1(eps_floor) *
                     (std::exp(eps_hat) + std::exp(-eps_hat));
  return make_check("kernel_sandwich", defect, 0.0, slack);
}

// Almost-constant density pins the boundary near the unit-measure sphere:
// the two-sided deviation, in units of that radius, stays under 4 eps.
inline CheckResult ball_closeness_check(const BoundaryCloud& cloud,
                                        const DimensionConstants& dims,
                                        double eps_hat, double eps_floor,
                                        int sphere_samples = 8192) {
  double rb = dims.unit_measure_radius();
  double sup_out = 0.0;
  for (const Vec3& p : cloud.points.points)
    sup_out = std::max(sup_out, std::abs(norm(p) - rb));
  SpatialGrid grid(cloud.points.points);
  double sup_in = 0.0;
  for (int k = 0; k < sphere_samples; ++k)
    sup_in = std::max(
        sup_in, grid.nearest(rb * fibonacci_direction(k, sphere_samples))
                    .distance);
  double d_hat = (sup_out + sup_in) / rb;
  double cover = 1.25 * std::sqrt(4.0 * M_PI / double(sphere_samples));
  double slack = 4.0 * eps_floor + cloud.spacing / rb + cover;
  return make_check("ball_closeness", d_hat, 4.0 * eps_hat, slack);
}

// Worst flatness ratio across the dyadic window the density oscillation
// controls, against the implied plane-band width.
inline CheckResult flatness_window_check(const BoundaryCloud& cloud,
                                         double r1, double eps_hat,
                                         double eps_floor,
                                         int center_count = 16) {
  double top = std::min(rho_from_eps(eps_hat, r1), 0.5 * r1);
  double floor_scale = std::max(8.0 * cloud.spacing, 0.01 * r1);
  CheckResult out;
  if (top < floor_scale) {
    out = make_check("flatness_window", 0.0, tau_from_eps(eps_hat), 0.0);
    out.applicable = false;
    out.pass = false;
    return out;
  }
  int levels = 1;
  while (levels < 4 && top / double(1 << levels) >= floor_scale) ++levels;
  auto rows = decay_scan(cloud, top, levels, center_count);
  double worst = 0.0, worst_slack = 0.0;
  for (const DecayRow& row : rows)
    if (row.worst_theta > worst) {
      worst = row.worst_theta;
      worst_slack = row.slack;
    }
  double bound = tau_from_eps(eps_hat);
  double slack = worst_slack + (tau_from_eps(eps_hat + eps_floor) - bound);
  return make_check("flatness_window", worst, bound, slack);
}

// Flatness against a configured target: the boundary is declared flat at
// the largest dyadic scale below the admissible window such that every
// resolvable scale underneath it meets the target. The certified scale
// lands in the note; failing at the very bottom of the ladder fails the
// check outright.
inline CheckResult reifenberg_sigma_check(const BoundaryCloud& cloud,
                                          double r1, double eps_hat,
                                          double sigma_target,
                                          int center_count = 16) {
  double top = std::min(rho_from_eps(eps_hat, r1), 0.5 * r1);
  double floor_scale = std::max(8.0 * cloud.spacing, 0.01 * r1);
  CheckResult out;
  if (top < floor_scale) {
    out = make_check("reifenberg_sigma", 0.0, sigma_target, 0.0);
    out.applicable = false;
    out.pass = false;
    out.note = "window below sampling resolution";
    return out;
  }
  int levels = 1;
  while (levels < 5 && top / double(1 << levels) >= floor_scale) ++levels;
  auto rows = decay_scan(cloud, top, levels, center_count);
  // Walk from the smallest scale up, keeping the passing suffix.
  double certified = 0.0, worst = 0.0, worst_slack = 0.0;
  bool any = false;
  for (int k = int(rows.size()) - 1; k >= 0; --k) {
    const DecayRow& row = rows[k];
    if (row.worst_theta > sigma_target + row.slack) break;
    certified = row.scale;
    any = true;
    if (row.worst_theta > worst) {
      worst = row.worst_theta;
      worst_slack = row.slack;
    }
  }
  if (!any) {
    const DecayRow& bottom = rows.back();
    out = make_check("reifenberg_sigma", bottom.worst_theta, sigma_target,
                     bottom.slack);
    out.note = "no certifiable scale";
    return out;
  }
  out = make_check("reifenberg_sigma", worst, sigma_target, worst_slack);
  out.note = "flat below scale " + std::to_string(certified);
  return out;
}

// Normal oscillation at and below the working cap, against twice the
// plane-band width (a band of relative width tau tilts normals by at most
// about two tau).
inline CheckResult normal_bmo_check(const BoundaryCloud& cloud, double r1,
                                    double eps_hat, double eps_floor,
                                    int center_count = 16) {
  double cap = std::min(rho_from_eps(eps_hat, r1), 0.125 * r1);
  CheckResult out;
  if (cap < 6.0 * cloud.spacing) {
    out = make_check("normal_bmo", 0.0, 2.0 * tau_from_eps(eps_hat), 0.0);
    out.applicable = false;
    out.pass = false;
    return out;
  }
  double worst = 0.0, worst_slack = 0.0;
  for (double s : {cap, 0.5 * cap}) {
    if (s < 6.0 * cloud.spacing) continue;
    OscillationRow row = normal_oscillation(cloud, s, center_count);
    if (row.worst > worst) {
      worst = row.worst;
      worst_slack = row.slack;
    }
  }
  double bound = 2.0 * tau_from_eps(eps_hat);
  double slack =
      worst_slack + 2.0 * (tau_from_eps(eps_hat + eps_floor) - bound / 2.0);
  return make_check("normal_bmo", worst, bound, slack);
}

// Mass ratios over boundary caps, against two bands from the same rows: the
// density band exp(±eps), and the crude dimensional corridor
// [mass/2, 4 omega_{n+1} r^n] that holds for any regular boundary.
struct AhlforsChecks {
  CheckResult band;
  CheckResult coarse;
};

inline AhlforsChecks ahlfors_checks(const BoundaryCloud& cloud,
                                    const DimensionConstants& dims,
                                    double eps_hat, double eps_floor,
                                    std::vector<double> radii = {},
                                    int center_count = 32) {
  if (radii.empty()) {
    double rb = dims.unit_measure_radius();
    radii = {0.25 * rb, 0.5 * rb, rb};
  }
  double corridor_hi = 4.0 * dims.omega_np1 / dims.omega_n;
  double band_defect = -1e300, band_slack = 0.0;
  double coarse_defect = -1e300, coarse_slack = 0.0;
  for (const AhlforsRow& row :
       ahlfors_ratios(cloud, dims, radii, center_count)) {
    double d = std::max(std::exp(-eps_hat) - row.lo,
                        row.hi - std::exp(eps_hat));
    if (d > band_defect) {
      band_defect = d;
      band_slack = row.slack;
    }
    double c = std::max(0.5 - row.lo, row.hi - corridor_hi);
    if (c > coarse_defect) {
      coarse_defect = c;
      coarse_slack = row.slack;
    }
  }
  AhlforsChecks out;
  double noise = std::expm1(eps_floor) *
                 (std::exp(eps_hat) + std::exp(-eps_hat));
  out.band = make_check("ahlfors_band", band_defect, 0.0, band_slack + noise);
  out.coarse =
      make_check("ahlfors_coarse", coarse_defect, 0.0, coarse_slack);
  return out;
}

inline CheckResult ahlfors_band_check(const BoundaryCloud& cloud,
                                      const DimensionConstants& dims,
                                      double eps_hat, double eps_floor,
                                      std::vector<double> radii = {},
                                      int center_count = 32) {
  return ahlfors_checks(cloud, dims, eps_hat, eps_floor, std::move(radii),
                        center_count)
      .band;
}

// Near-boundary gradient cap: the boundary-scaled gradient sup stays under
// the density band around the mean kernel. The only hypotheses are finite
// cap growth and the measured oscillation itself, so this runs on every
// domain the sampler can resolve.
inline CheckResult pole_gradient_check(const SupGradientEstimate& est,
                                       double area, double eps_hat,
                                       double eps_floor) {
  double mean_kernel = 1.0 / area;
  double bound = std::exp(eps_hat) * mean_kernel;
  double slack = 3.0 * est.mean_stderr +
                 mean_kernel * std::exp(eps_hat) * std::expm1(eps_floor);
  return make_check("pole_gradient", est.scaled_sup, bound, slack);
}

// Boundary-scaled gradient sups across a ladder of shrinking probe widths.
// Widths below the sampler's resolution floor are dropped rather than
// probed; `coarsened` records that the requested ladder was cut.
struct GradientWidthTable {
  std::vector<double> widths;  // descending
  std::vector<SupGradientEstimate> rows;
  bool coarsened = false;
};

inline GradientWidthTable gradient_width_table(
    const WosSampler& sampler, const DimensionConstants& dims, Vec3 pole,
    double top_width, int count, double shrink, int probe_count,
    std::int64_t per_node, int nodes, std::uint64_t seed, int threads = 0) {
  if (count < 1) throw std::invalid_argument("width table: count < 1");
  if (!(shrink > 0.0 && shrink < 1.0))
    throw std::invalid_argument("width table: shrink outside (0, 1)");
  double min_width = 1.5 * (2.0 * sampler.cloud().spacing +
                            10.0 * sampler.stop_distance());
  GradientWidthTable table;
  double w = top_width;
  for (int k = 0; k < count; ++k, w *= shrink) {
    if (w <= min_width) {
      table.coarsened = true;
      break;
    }
    table.widths.push_back(w);
    table.rows.push_back(sup_gradient_near_boundary(
        sampler, dims, pole, w, probe_count, per_node, nodes,
        seed + std::uint64_t(k), threads));
  }
  return table;
}

// The scaled sup at the narrowest width carries the check; on top of that,
// the ladder must not grow as the probes close in on the boundary, beyond
// the combined noise of adjacent rows.
inline CheckResult main_lemma_check(const GradientWidthTable& table,
                                    double area, double eps_hat,
                                    double eps_floor) {
  if (table.rows.empty())
    throw std::invalid_argument("main lemma check: empty width table");
  CheckResult out =
      pole_gradient_check(table.rows.back(), area, eps_hat, eps_floor);
  double trend_defect = 0.0;
  for (std::size_t k = 0; k + 1 < table.rows.size(); ++k) {
    double wide = table.rows[k].scaled_sup;
    double narrow = table.rows[k + 1].scaled_sup;
    double noise = 3.0 * (table.rows[k].mean_stderr +
                          table.rows[k + 1].mean_stderr) +
                   0.02 / area;
    trend_defect = std::max(trend_defect, narrow - wide - noise);
  }
  if (trend_defect > 0.0) {
    out.pass = false;
    out.margin = std::min(out.margin, -trend_defect);
    out.note = "sup grows while widths shrink";
  }
  if (table.coarsened)
    out.note += out.note.empty() ? "width ladder coarsened"
                                 : "; width ladder coarsened";
  return out;
}

// Radial blend map from the inner ball onto the domain: identity up to a
// quarter radius, then a quadratic radial correction reaching the boundary.
// Monotone along rays for any radius above 0.625 r1, with stretch bounds
// from the radial derivative, the radius ratio, and the angular slope.
// Explicit radial homeomorphism between the closed domain and the closed
// ball of the certified inner radius r1. Inside |x| <= r1/4 it is the exact
// identity; beyond that a quadratic radial blend carries the sphere r1 w
// onto the boundary graph r(w) w. Directions never change, so injectivity
// reduces to radial monotonicity, which holds whenever the boundary stays
// within the blend's monotone range.
class BallHomeomorphism {
 public:
  explicit BallHomeomorphism(const StarDomain* domain)
      : domain_(domain),
        r1_(domain->min_radius_bound()),
        s0_(0.25 * r1_),
        span_(r1_ - s0_) {}

  // B(0, r1) -> domain.
  Vec3 from_ball(Vec3 x) const {
    double s = norm(x);
    if (s <= s0_) return x;
    Vec3 w = (1.0 / s) * x;
    double b = beta(w);
    if (b == 0.0) return x;
    double u = s - s0_;
    return (s + b * u * u) * w;
  }

  // domain -> B(0, r1): inverts the radial blend along the same direction.
  Vec3 to_ball(Vec3 y) const {
    double s = norm(y);
    if (s <= s0_) return y;
    Vec3 w = (1.0 / s) * y;
    double b = beta(w);
    if (b == 0.0) return y;
    double d = s - s0_;
    // Monotone root of b u^2 + u - d = 0, written to stay stable as b -> 0.
    double u = 2.0 * d / (1.0 + std::sqrt(1.0 + 4.0 * b * d));
    return (s0_ + u) * w;
  }

  double inner_radius() const { return r1_; }
  double blend_start() const { return s0_; }

 private:
  double beta(const Vec3& w) const {
    return (domain_->radius(w) - r1_) / (span_ * span_);
  }

  const StarDomain* domain_;
  double r1_, s0_, span_;
};

struct GraphMapStats {
  double distortion = 0.0;  // worst of stretch and inverse stretch
  bool monotone = true;
  double boundary_residual = 0.0;  // |h(r1 w)| - r(w), exact blend => 0
};

inline GraphMapStats graph_map_stats(const StarDomain& domain,
                                     int dir_count = 4096) {
  double r1 = domain.min_radius_bound();
  double s0 = 0.25 * r1;
  double span = r1 - s0;
  double gsup = domain.gradient_sup_bound();
  GraphMapStats stats;
  stats.distortion = 1.0;
  for (int k = 0; k < dir_count; ++k) {
    Vec3 w = fibonacci_direction(k, dir_count);
    double rw = domain.radius(w);
    double beta = (rw - r1) / (span * span);
    double deriv_end = 1.0 + 2.0 * beta * span;
    if (deriv_end <= 0.0) stats.monotone = false;
    double ratio_end = rw / r1;
    double ang = ratio_end + gsup / r1;
    for (double v : {deriv_end, ratio_end, ang})
      stats.distortion =
          std::max({stats.distortion, v, v > 0.0 ? 1.0 / v : 1e300});
    double h_end = r1 + beta * span * span;
    stats.boundary_residual =
        std::max(stats.boundary_residual, std::abs(h_end - rw));
  }
  return stats;
}

inline CheckResult graph_map_check(const StarDomain& domain, double eps_hat,
                                   double eps_floor, int dir_count = 4096) {
  GraphMapStats stats = graph_map_stats(domain, dir_count);
  double bound = std::exp(4.0 * eps_hat);
  double slack = bound * std::expm1(4.0 * eps_floor) + 0.02;
  CheckResult out =
      make_check("graph_map", stats.distortion, bound, slack);
  if (!stats.monotone || stats.boundary_residual > 1e-9 * domain.scale()) {
    out.pass = false;
    out.margin = std::min(out.margin, -1.0);
  }
  return out;
}

struct ChainBudgets {
  int kernel_sites = 32;
  double cap_fraction = 0.04;
  std::int64_t kernel_trajectories = 100000;
  int center_count = 16;
  double sigma_target = 0.1;
  double sup_width_frac = 0.07;
  int sup_width_count = 3;
  double sup_width_shrink = 0.75;
  int sup_probes = 24;
  std::int64_t sup_per_node = 1200;
  int sup_nodes = 16;
  std::uint64_t seed = 1;
  int threads = 0;
  bool run_gradient = true;
};

struct ChainReport {
  double eps_hat = 0.0;
  double noise_floor = 0.0;
  double coverage = 0.0;
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const CheckResult& c : checks)
      if (c.applicable && !c.pass) return false;
    return true;
  }
};

// Measure the exit density once, then run every consequence check against
// the same oscillation estimate. The pole sits at the origin.
inline ChainReport run_stability_chain(const WosSampler& sampler,
                                       const DimensionConstants& dims,
                                       const ChainBudgets& budgets) {
  const StarDomain& domain = sampler.domain();
  const BoundaryCloud& cloud = sampler.cloud();
  KernelField field = estimate_poisson_kernel(
      sampler, {0, 0, 0}, budgets.kernel_sites, budgets.cap_fraction,
      budgets.kernel_trajectories, budgets.seed, budgets.threads);
  ChainReport report;
  report.eps_hat = field.eps_hat;
  report.noise_floor = field.noise_floor;
  report.coverage = field.coverage;
  double eps = field.eps_hat;
  double floor = field.noise_floor;
  double r1 = domain.min_radius_bound();

  report.checks.push_back(kernel_sandwich_check(domain, dims, eps, floor));
  report.checks.push_back(ball_closeness_check(cloud, dims, eps, floor));
  report.checks.push_back(
      flatness_window_check(cloud, r1, eps, floor, budgets.center_count));
  report.checks.push_back(reifenberg_sigma_check(
      cloud, r1, eps, budgets.sigma_target, budgets.center_count));
  report.checks.push_back(
      normal_bmo_check(cloud, r1, eps, floor, budgets.center_count));
  AhlforsChecks ahlfors = ahlfors_checks(
      cloud, dims, eps, floor, {}, std::max(budgets.center_count, 32));
  report.checks.push_back(ahlfors.band);
  report.checks.push_back(ahlfors.coarse);

  double width = budgets.sup_width_frac * r1;
  double depth_floor =
      2.0 * cloud.spacing + 10.0 * sampler.stop_distance();
  bool gradient_feasible =
      budgets.run_gradient && width > 1.5 * depth_floor;
  if (gradient_feasible) {
    GradientWidthTable table = gradient_width_table(
        sampler, dims, {0, 0, 0}, width, budgets.sup_width_count,
        budgets.sup_width_shrink, budgets.sup_probes, budgets.sup_per_node,
        budgets.sup_nodes, budgets.seed + 7, budgets.threads);
    report.checks.push_back(
        main_lemma_check(table, domain.surface_area(), eps, floor));
  } else {
    CheckResult out = make_check("pole_gradient", 0.0, 0.0, 0.0);
    out.applicable = false;
    out.pass = false;
    out.note = "probe widths below sampling resolution";
    report.checks.push_back(out);
  }
  report.checks.push_back(graph_map_check(domain, eps, floor));
  return report;
}

}  // namespace pklab
