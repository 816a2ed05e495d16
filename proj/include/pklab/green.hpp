#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pklab/potential.hpp"
#include "pklab/wos.hpp"

namespace pklab {

struct KernelSite {
  Vec3 point{0, 0, 0};
  double cap_mass = 0.0;
  std::int64_t hits = 0;
  double density = 0.0;
  double rel_stderr = 0.0;
  bool flagged = false;
};

struct KernelField {
  std::vector<KernelSite> sites;
  double cap_radius = 0.0;
  double area = 0.0;
  double coverage = 0.0;
  double min_density = 0.0;
  double max_density = 0.0;
  // Smallest eps with exp(-eps) <= area * density <= exp(eps) across the
  // unflagged sites. Zero for a perfectly flat measured field.
  double eps_hat = 0.0;
  // Expected spurious eps on a flat kernel from counting noise alone: the
  // per-site deviation scaled by the sup over 2M one-sided extremes.
  double noise_floor = 0.0;
  std::int64_t total = 0;
};

// Cap-averaged boundary density of harmonic measure seen from `pole`:
// exit counts over caps of a fixed surface-mass fraction around a spread of
// boundary sites.
inline KernelField estimate_poisson_kernel(const WosSampler& sampler,
                                           Vec3 pole, int site_count,
                                           double cap_fraction,
                                           std::int64_t trajectories,
                                           std::uint64_t seed,
                                           int threads = 0) {
  if (site_count < 4)
    throw std::invalid_argument("estimate_poisson_kernel: need >= 4 sites");
  if (!(cap_fraction > 0.0 && cap_fraction < 0.25))
    throw std::invalid_argument(
        "estimate_poisson_kernel: cap fraction outside (0, 0.25)");
  const BoundaryCloud& cloud = sampler.cloud();
  std::int64_t censored = 0;
  std::vector<std::int64_t> counts =
      sampler.exit_counts(pole, trajectories, seed, threads, &censored);

  KernelField field;
  field.total = trajectories - censored;
  for (double w : cloud.weights) field.area += w;
  field.cap_radius = std::sqrt(cap_fraction * field.area / M_PI);

  std::vector<char> covered(cloud.size(), 0);
  for (int s = 0; s < site_count; ++s) {
    Vec3 w = fibonacci_direction(s, site_count);
    KernelSite site;
    site.point = sampler.domain().radius(w) * w;
    for (int id : sampler.grid().within_radius(site.point, field.cap_radius)) {
      site.cap_mass += cloud.weights[id];
      site.hits += counts[id];
      covered[id] = 1;
    }
    if (site.hits < 50)
      throw std::runtime_error(
          "estimate_poisson_kernel: a site cap saw almost no exits");
    double p = double(site.hits) / double(field.total);
    site.density = p / site.cap_mass;
    site.rel_stderr = std::sqrt((1.0 - p) / double(site.hits));
    site.flagged = site.hits < 200;
    field.sites.push_back(site);
  }

  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (covered[i]) field.coverage += cloud.weights[i];
  field.coverage /= field.area;

  field.min_density = 1e300;
  field.max_density = -1e300;
  int unflagged = 0;
  double stderr_sum = 0.0;
  for (const KernelSite& s : field.sites) {
    if (s.flagged) continue;
    ++unflagged;
    stderr_sum += s.rel_stderr;
    field.min_density = std::min(field.min_density, s.density);
    field.max_density = std::max(field.max_density, s.density);
  }
  if (unflagged == 0)
    throw std::runtime_error("estimate_poisson_kernel: every site flagged");
  double up = std::log(field.max_density * field.area);
  double down = -std::log(field.min_density * field.area);
  field.eps_hat = std::max({up, down, 0.0});
  field.noise_floor = (stderr_sum / unflagged) *
                      std::sqrt(2.0 * std::log(2.0 * unflagged));
  return field;
}

struct GreenEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  double bias = 0.0;
  std::int64_t used = 0;
};

// Pointwise Green function with pole `pole`, evaluated at x: the direct
// fundamental term minus the harmonic extension of the fundamental solution
// sampled by walks from x. The bias field bounds the systematic error from
// absorbing in a shell and snapping exits to cloud samples.
inline GreenEstimate estimate_green(const WosSampler& sampler,
                                    const DimensionConstants& dims, Vec3 pole,
                                    Vec3 x, std::int64_t trajectories,
                                    std::uint64_t seed, int threads = 0,
                                    std::uint64_t stream_base = 0) {
  if (!sampler.domain().contains(pole))
    throw std::invalid_argument("estimate_green: pole outside domain");
  double sep = dist(x, pole);
  if (!(sep > 1e-9))
    throw std::invalid_argument("estimate_green: x at the pole");
  std::vector<std::int32_t> exits =
      sampler.exit_indices(x, trajectories, seed, threads, stream_base);
  const auto& pts = sampler.cloud().points.points;
  // Accumulate shifted by the first value so the variance formula does not
  // cancel catastrophically when the samples are nearly identical.
  double shift = 0.0, sum = 0.0, sum2 = 0.0, tmin = 1e300;
  std::int64_t used = 0;
  for (std::int32_t e : exits) {
    if (e < 0) continue;
    double t = dist(pts[e], pole);
    tmin = std::min(tmin, t);
    double f = fundamental_solution(dims, t);
    if (used == 0) shift = f;
    sum += f - shift;
    sum2 += (f - shift) * (f - shift);
    ++used;
  }
  GreenEstimate est;
  est.used = used;
  double mean = sum / double(used);
  est.value = fundamental_solution(dims, sep) - (shift + mean);
  double var = std::max(0.0, sum2 / double(used) - mean * mean);
  est.stderr_ = std::sqrt(var / double(used));
  double snap = sampler.snap_distance();
  est.bias =
      2.0 * snap *
      fundamental_solution_slope(dims, std::max(tmin - snap, 0.5 * tmin));
  return est;
}

struct GradientEstimate {
  Vec3 gradient{0, 0, 0};
  double stderr_ = 0.0;
  double rho = 0.0;
  int nodes = 0;
};

// Gradient of the Green function by the sphere-mean identity: for G
// harmonic in B(x, rho), grad G(x) = (3 / rho) * avg over the sphere of
// G(zeta) (zeta - x) / rho. Centering G around its node mean removes the
// constant-term leakage of the finite node set.
inline GradientEstimate estimate_green_gradient(
    const WosSampler& sampler, const DimensionConstants& dims, Vec3 pole,
    Vec3 x, std::int64_t per_node, std::uint64_t seed, double rho = 0.0,
    int nodes = 32, int threads = 0, std::uint64_t stream_base = 0) {
  if (nodes < 8)
    throw std::invalid_argument("estimate_green_gradient: nodes < 8");
  double d = sampler.certified_distance(x);
  if (rho <= 0.0) rho = 0.5 * d;
  if (!(rho <= 0.6001 * d))
    throw std::invalid_argument(
        "estimate_green_gradient: probe sphere too close to the boundary");
  // Oscillatory snap error in the node values dies off like
  // exp(-depth / spacing); keep every node a few spacings deep.
  double depth = d - rho;
  if (depth < 2.0 * sampler.cloud().spacing + 10.0 * sampler.stop_distance())
    throw std::invalid_argument(
        "estimate_green_gradient: node depth under the resolution floor");
  if (dist(x, pole) < 1.5 * rho)
    throw std::invalid_argument(
        "estimate_green_gradient: pole inside the probe sphere");

  std::vector<double> values(nodes), errs(nodes);
  std::vector<Vec3> dirs = fibonacci_sphere(nodes);
  for (int k = 0; k < nodes; ++k) {
    GreenEstimate g = estimate_green(
        sampler, dims, pole, x + rho * dirs[k], per_node, seed, threads,
        stream_base + std::uint64_t(k) * std::uint64_t(per_node));
    values[k] = g.value;
    errs[k] = g.stderr_;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= nodes;
  GradientEstimate est;
  est.rho = rho;
  est.nodes = nodes;
  double var = 0.0;
  for (int k = 0; k < nodes; ++k) {
    est.gradient += (3.0 / (rho * nodes)) * (values[k] - mean) * dirs[k];
    var += errs[k] * errs[k];
  }
  est.stderr_ = 3.0 * std::sqrt(var) / (rho * nodes);
  return est;
}

struct SupGradientEstimate {
  double raw_sup = 0.0;
  // Raw sup rescaled by (1 - width / r1)^n: on an exact ball the interior
  // gradient at depth w exceeds its boundary limit by exactly the inverse
  // factor, so the scaled value is the fair one to hold against a kernel
  // bound.
  double scaled_sup = 0.0;
  double width = 0.0;
  Vec3 argmax{0, 0, 0};
  double mean_stderr = 0.0;
  int probes = 0;
};

// Largest Green gradient magnitude over probes one `width` inside the
// boundary, spread over the cloud.
inline SupGradientEstimate sup_gradient_near_boundary(
    const WosSampler& sampler, const DimensionConstants& dims, Vec3 pole,
    double width, int probe_count, std::int64_t per_node, int nodes,
    std::uint64_t seed, int threads = 0) {
  if (probe_count < 8)
    throw std::invalid_argument("sup_gradient_near_boundary: probes < 8");
  const BoundaryCloud& cloud = sampler.cloud();
  double r1 = sampler.domain().min_radius_bound();
  if (!(width > 0.0 && width < 0.5 * r1))
    throw std::invalid_argument("sup_gradient_near_boundary: bad width");
  std::size_t stride = std::max<std::size_t>(1, cloud.size() / probe_count);
  SupGradientEstimate est;
  est.width = width;
  double err_sum = 0.0;
  std::uint64_t base = 0;
  double depth_floor = 2.0 * cloud.spacing + 10.0 * sampler.stop_distance();
  for (std::size_t j = 0; j < cloud.size(); j += stride) {
    Vec3 x = cloud.points.points[j] - width * cloud.normals[j];
    if (!sampler.domain().contains(x)) continue;
    double d = sampler.certified_distance(x);
    // Largest probe sphere whose nodes keep a resolution-floor depth.
    double rho = std::min({0.55 * d, 0.8 * width, d - 1.1 * depth_floor});
    if (rho < 0.2 * width) continue;
    if (dist(x, pole) < 1.5 * rho) continue;
    GradientEstimate g =
        estimate_green_gradient(sampler, dims, pole, x, per_node, seed, rho,
                                nodes, threads, base);
    base += std::uint64_t(nodes) * std::uint64_t(per_node);
    ++est.probes;
    err_sum += g.stderr_;
    double mag = norm(g.gradient);
    if (mag > est.raw_sup) {
      est.raw_sup = mag;
      est.argmax = x;
    }
  }
  if (est.probes < probe_count / 2)
    throw std::runtime_error(
        "sup_gradient_near_boundary: too few usable probes");
  est.mean_stderr = err_sum / est.probes;
  est.scaled_sup = est.raw_sup * std::pow(1.0 - width / r1, double(dims.n));
  return est;
}

struct GrowthEstimate {
  double k0 = 0.0;
  double radius_at_max = 0.0;
  Vec3 center_at_max{0, 0, 0};
  double slack = 0.0;
};

// Largest ratio omega(B(q, t)) / t^n over boundary centers and the given
// radii. On the unit-measure ball this is exactly pi at every scale.
inline GrowthEstimate growth_constant(const WosSampler& sampler,
                                      const std::vector<std::int64_t>& counts,
                                      std::int64_t total,
                                      const std::vector<double>& radii,
                                      int center_count,
                                      const DimensionConstants& dims) {
  if (counts.size() != sampler.cloud().size())
    throw std::invalid_argument("growth_constant: counts/cloud mismatch");
  if (total <= 0) throw std::invalid_argument("growth_constant: no mass");
  const BoundaryCloud& cloud = sampler.cloud();
  std::size_t stride = std::max<std::size_t>(1, cloud.size() / center_count);
  GrowthEstimate est;
  std::int64_t hits_at_max = 0;
  for (double t : radii) {
    if (!(t > 0.0)) throw std::invalid_argument("growth_constant: t <= 0");
    double tn = std::pow(t, double(dims.n));
    for (std::size_t c = 0; c < cloud.size(); c += stride) {
      std::int64_t hits = 0;
      for (int id : sampler.grid().within_radius(cloud.points.points[c], t))
        hits += counts[id];
      double ratio = (double(hits) / double(total)) / tn;
      if (ratio > est.k0) {
        est.k0 = ratio;
        est.radius_at_max = t;
        est.center_at_max = cloud.points.points[c];
        hits_at_max = hits;
      }
    }
  }
  if (hits_at_max > 0)
    est.slack = est.k0 * (4.0 * sampler.snap_distance() / est.radius_at_max +
                          3.0 / std::sqrt(double(hits_at_max)));
  return est;
}

}  // namespace pklab
