#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pklab/constants.hpp"
#include "pklab/green.hpp"
#include "pklab/potential.hpp"
#include "pklab/quadrature.hpp"
#include "pklab/vec.hpp"
#include "pklab/wos.hpp"

namespace pklab {

// Cross-checks between independent estimates of the same quantity. Both
// checks compare a pointwise Monte Carlo pipeline against an exit-count
// pipeline, so a bug in either shows up as a mismatch here even on domains
// with no closed form.

namespace detail {
// Slack terms below bound the local kernel density by this multiple of the
// mean density. Generous for the gentle perturbations this code targets.
inline constexpr double kKernelHeadroom = 3.0;
}  // namespace detail

// Mean of the Green function over a full sphere centered at a boundary
// point, extended by zero outside the domain, against the short-range part
// of the exit integral from the pole:
//
//   mean over S(q0, r) of G(pole, .) 1_domain
//     = sum over exits q with |q - q0| < r of (F(|q - q0|) - F(r)) weights
//
// which holds exactly because the shell average of F(|. - z|) is F(r) for
// z inside the shell and F(|center - z|) for z outside, while the exit
// representation of G has zero shell mean at a boundary center. On the ball
// of radius R with a centered pole both sides equal r / (16 pi R^2).
struct SphereMeanCheck {
  double sphere_mean = 0.0;
  double exit_integral = 0.0;
  double sphere_stderr = 0.0;
  // Sum of per-node snap biases, averaged over the nodes.
  double sphere_bias = 0.0;
  double exit_stderr = 0.0;
  // Bound on the resolution error of the exit side: sub-spacing distances
  // are snapped up to one spacing and exits land on cloud samples.
  double exit_slack = 0.0;
  double radius = 0.0;
  int nodes_inside = 0;
  int nodes_outside = 0;
};

inline SphereMeanCheck sphere_mean_identity(
    const WosSampler& sampler, const DimensionConstants& dims, Vec3 pole,
    Vec3 boundary_dir, double radius, int node_count, std::int64_t per_node,
    std::int64_t exit_total, std::uint64_t seed, int threads = 0) {
  if (node_count < 16)
    throw std::invalid_argument("sphere_mean_identity: node_count < 16");
  if (per_node <= 0 || exit_total <= 0)
    throw std::invalid_argument("sphere_mean_identity: empty budget");
  const StarDomain& domain = sampler.domain();
  Vec3 u = normalized(boundary_dir);
  Vec3 q0 = domain.radius(u) * u;
  double sep = dist(q0, pole);
  if (!(radius > 0.0 && radius < 0.5 * sep))
    throw std::invalid_argument(
        "sphere_mean_identity: radius must stay well inside the pole gap");

  SphereMeanCheck check;
  check.radius = radius;

  // Sphere side: equal-weight quadrature; outside nodes contribute zero.
  double err2 = 0.0;
  for (int k = 0; k < node_count; ++k) {
    Vec3 y = q0 + radius * fibonacci_direction(k, node_count);
    if (!domain.contains(y)) {
      ++check.nodes_outside;
      continue;
    }
    GreenEstimate g =
        estimate_green(sampler, dims, pole, y, per_node, seed, threads,
                       std::uint64_t(k) * std::uint64_t(per_node));
    check.sphere_mean += g.value;
    check.sphere_bias += g.bias;
    err2 += g.stderr_ * g.stderr_;
    ++check.nodes_inside;
  }
  check.sphere_mean /= node_count;
  check.sphere_bias /= node_count;
  check.sphere_stderr = std::sqrt(err2) / node_count;

  // Exit side: counts from the pole, one stream family above the sphere
  // side so the two halves stay independent.
  std::vector<std::int64_t> counts =
      sampler.exit_counts(pole, exit_total, seed + 1, threads);
  const auto& pts = sampler.cloud().points.points;
  double spacing = sampler.cloud().spacing;
  double f_r = fundamental_solution(dims, radius);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    double t = dist(pts[i], q0);
    if (t >= radius) continue;
    double f = fundamental_solution(dims, std::max(t, spacing)) - f_r;
    double w = double(counts[i]) / double(exit_total);
    sum += w * f;
    sum2 += w * f * f;
  }
  check.exit_integral = sum;
  double var = std::max(0.0, sum2 - sum * sum);
  check.exit_stderr = std::sqrt(var / double(exit_total));
  double mean_density = 1.0 / domain.surface_area();
  double snap = sampler.snap_distance();
  check.exit_slack =
      detail::kKernelHeadroom * mean_density *
      (spacing + 0.5 * snap * (1.0 + std::log(radius / spacing)));
  return check;
}

// Harmonic measure of a boundary cap from exit counts against the flux of
// the Green gradient through the same cap. The gradient is probed one
// `depth` inside each quadrature node and rescaled by (|x| / |q|)^n, which
// on a centered ball recovers the boundary density exactly. On the ball a
// cap of chord c carries mass c^2 / (4 R^2) on both sides.
struct FluxCheck {
  double cap_mass = 0.0;
  double mass_stderr = 0.0;
  // Bound on rim jitter: samples within a spacing of the cap edge can sit
  // on either side of the cut.
  double mass_slack = 0.0;
  double flux = 0.0;
  double flux_stderr = 0.0;
  double chord = 0.0;
  double depth = 0.0;
  int nodes = 0;
  int skipped = 0;
};

inline FluxCheck cap_flux_identity(const WosSampler& sampler,
                                   const DimensionConstants& dims, Vec3 pole,
                                   Vec3 cap_dir, double chord, double depth,
                                   int node_target, std::int64_t per_node,
                                   int grad_nodes, std::int64_t exit_total,
                                   std::uint64_t seed, int threads = 0) {
  if (node_target < 8)
    throw std::invalid_argument("cap_flux_identity: node_target < 8");
  if (per_node <= 0 || exit_total <= 0)
    throw std::invalid_argument("cap_flux_identity: empty budget");
  const StarDomain& domain = sampler.domain();
  const BoundaryCloud& cloud = sampler.cloud();
  double r1 = domain.min_radius_bound();
  if (!(chord > 0.0 && chord < r1))
    throw std::invalid_argument("cap_flux_identity: bad chord");
  if (!(depth > 0.0 && depth < 0.25 * r1))
    throw std::invalid_argument("cap_flux_identity: bad depth");
  Vec3 u = normalized(cap_dir);
  Vec3 q0 = domain.radius(u) * u;

  FluxCheck check;
  check.chord = chord;
  check.depth = depth;

  // Exit side.
  std::vector<std::int64_t> counts =
      sampler.exit_counts(pole, exit_total, seed + 1, threads);
  const auto& pts = cloud.points.points;
  std::vector<std::size_t> cap;
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (dist(pts[i], q0) > chord) continue;
    cap.push_back(i);
    hits += counts[i];
  }
  if (cap.empty())
    throw std::runtime_error("cap_flux_identity: cap holds no samples");
  check.cap_mass = double(hits) / double(exit_total);
  check.mass_stderr = std::sqrt(
      std::max(0.0, check.cap_mass * (1.0 - check.cap_mass)) /
      double(exit_total));
  double mean_density = 1.0 / domain.surface_area();
  check.mass_slack = detail::kKernelHeadroom * mean_density * 2.0 * M_PI *
                     chord * (cloud.spacing + sampler.snap_distance());

  // Flux side: stride the cap samples down to about node_target gradient
  // probes and correct by the weight actually covered.
  double w_cap = 0.0;
  for (std::size_t i : cap) w_cap += cloud.weights[i];
  std::size_t stride = std::max<std::size_t>(1, cap.size() / node_target);
  double w_attempted = 0.0, w_used = 0.0, flux = 0.0, err2 = 0.0;
  double floor = 2.0 * cloud.spacing + 10.0 * sampler.stop_distance();
  std::uint64_t base = 0;
  for (std::size_t j = 0; j < cap.size(); j += stride) {
    std::size_t i = cap[j];
    Vec3 q = pts[i];
    w_attempted += cloud.weights[i];
    Vec3 x = q - depth * cloud.normals[i];
    if (!domain.contains(x)) x = q - depth * normalized(q);
    if (!domain.contains(x)) {
      ++check.skipped;
      continue;
    }
    double d = sampler.certified_distance(x);
    double rho = std::min({0.55 * d, 0.8 * depth, d - 1.1 * floor});
    if (rho < 0.2 * depth || dist(x, pole) < 1.5 * rho) {
      ++check.skipped;
      continue;
    }
    GradientEstimate g = estimate_green_gradient(
        sampler, dims, pole, x, per_node, seed, rho, grad_nodes, threads,
        base);
    base += std::uint64_t(grad_nodes) * std::uint64_t(per_node);
    double factor = std::pow(norm(x) / norm(q), double(dims.n));
    double w = cloud.weights[i];
    flux += w * factor * norm(g.gradient);
    err2 += w * factor * g.stderr_ * w * factor * g.stderr_;
    w_used += w;
    ++check.nodes;
  }
  if (w_used < 0.5 * w_attempted)
    throw std::runtime_error("cap_flux_identity: too few usable flux nodes");
  check.flux = flux * (w_cap / w_used);
  check.flux_stderr = std::sqrt(err2) * (w_cap / w_used);
  return check;
}

}  // namespace pklab
