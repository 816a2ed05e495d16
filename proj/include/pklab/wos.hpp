#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pklab/domain.hpp"
#include "pklab/grid.hpp"
#include "pklab/parallel.hpp"
#include "pklab/rng.hpp"
#include "pklab/vec.hpp"

namespace pklab {

struct WosConfig {
  // Absorb once the certified boundary distance drops below this fraction
  // of the certified inradius.
  double stop_shell = 0.01;
  // Skip the nearest-neighbor query while the radial bound alone certifies
  // at least this fraction of the inradius.
  double far_skip = 0.25;
  int max_steps = 20000;
  // Runs abort if more than this fraction of trajectories hits max_steps.
  double censor_limit = 1e-3;
};

// Sphere-hopping sampler of harmonic measure on a star-shaped domain. Each
// step jumps to a uniform point on the sphere of certified interior radius;
// the walk absorbs in a thin shell at the boundary and snaps to the nearest
// cloud sample. Trajectories draw from per-index counter streams, so batch
// results do not depend on the thread count.
class WosSampler {
 public:
  WosSampler(StarDomain domain, BoundaryCloud cloud, WosConfig config = {})
      : domain_(std::move(domain)),
        cloud_(std::move(cloud)),
        grid_(cloud_.points.points),
        config_(config) {
    if (cloud_.size() < 100)
      throw std::invalid_argument("WosSampler: boundary cloud too small");
    rmin_ = domain_.min_radius_bound();
    stop_dist_ = config.stop_shell * rmin_;
    if (cloud_.spacing > 0.5 * rmin_)
      throw std::invalid_argument("WosSampler: cloud spacing too coarse");
    // Radial-gap certificate: the signed height function |y| - r(y/|y|) has
    // ambient Lipschitz constant at most sqrt(1 + (sup|grad r| / |y|)^2), so
    // in the shallow band (gap <= 0.2 rmin at |x| >= 0.5 rmin, where the
    // segment to the nearest boundary point keeps |y| >= 0.3 rmin) the gap
    // over that constant bounds the true distance from below. Exact on the
    // ball, and it keeps step sizes proportional to the true distance, which
    // the subtractive cloud bound cannot do once inside one spacing.
    double tilt = domain_.gradient_sup_bound() / (0.3 * rmin_);
    graph_factor_ = 1.0 / std::sqrt(1.0 + tilt * tilt);
    gap_cap_ = 0.2 * rmin_;
  }

  const StarDomain& domain() const { return domain_; }
  const BoundaryCloud& cloud() const { return cloud_; }
  const SpatialGrid& grid() const { return grid_; }
  double stop_distance() const { return stop_dist_; }
  double snap_distance() const {
    return stop_dist_ / graph_factor_ + cloud_.spacing;
  }

  // Lower bound on the distance from x to the boundary, valid whenever x is
  // inside: radial gap to the inner ball, the graph certificate in the
  // shallow band, and the sampled cloud as a last resort.
  double certified_distance(const Vec3& x) const {
    double rho = norm(x);
    double d = rmin_ - rho;
    if (d >= config_.far_skip * rmin_) return d;
    if (rho >= 0.5 * rmin_) {
      double gap = domain_.radius((1.0 / rho) * x) - rho;
      if (gap <= 0.0) return 0.0;
      if (gap <= gap_cap_) d = std::max(d, gap * graph_factor_);
    }
    return std::max(d, grid_.nearest(x).distance - cloud_.spacing);
  }

  // One walk from x0; returns the exit sample index, or -1 when the step
  // budget ran out. The stepping loop never touches the sample grid: the
  // radial and graph certificates steer the walk, and the grid is consulted
  // once, to snap the absorbed endpoint to an exit sample.
  int run_trajectory(Vec3 x0, RngStream& rng) const {
    Vec3 x = x0;
    for (int step = 0; step < config_.max_steps; ++step) {
      double rho = norm(x);
      double d = rmin_ - rho;
      if (d < config_.far_skip * rmin_) {
        double gap = gap_cap_ + 1.0;
        if (rho >= 0.5 * rmin_) {
          gap = domain_.radius((1.0 / rho) * x) - rho;
          if (gap <= 0.0) return grid_.nearest(x).index;
        }
        if (gap <= gap_cap_)
          d = std::max(d, gap * graph_factor_);
        else
          d = std::max(d, grid_.nearest(x).distance - cloud_.spacing);
        if (d <= stop_dist_) return grid_.nearest(x).index;
      }
      x += d * rng.unit_vector();
    }
    return -1;
  }

  // Exit sample indices for a batch of trajectories, one per-trajectory
  // stream keyed by (seed, stream_base + index). Callers running several
  // batches under one seed partition the stream space via stream_base.
  // Censored walks record -1.
  std::vector<std::int32_t> exit_indices(Vec3 x0, std::int64_t count,
                                         std::uint64_t seed, int threads = 0,
                                         std::uint64_t stream_base = 0) const {
    if (count <= 0) throw std::invalid_argument("exit_indices: count <= 0");
    if (!domain_.contains(x0))
      throw std::invalid_argument("exit_indices: start outside domain");
    std::vector<std::int32_t> exits(count);
    parallel_for(std::int64_t(0), count, resolve_threads(threads),
                 [&](std::int64_t i) {
                   RngStream rng(seed, stream_base + std::uint64_t(i));
                   exits[i] = run_trajectory(x0, rng);
                 });
    std::int64_t censored = 0;
    for (std::int32_t e : exits)
      if (e < 0) ++censored;
    if (double(censored) > config_.censor_limit * double(count))
      throw std::runtime_error("exit_indices: too many censored walks");
    return exits;
  }

  // Exit counts per boundary sample, plus the censored count.
  std::vector<std::int64_t> exit_counts(Vec3 x0, std::int64_t count,
                                        std::uint64_t seed, int threads = 0,
                                        std::int64_t* censored = nullptr) const {
    std::vector<std::int32_t> exits = exit_indices(x0, count, seed, threads);
    std::vector<std::int64_t> hits(cloud_.size(), 0);
    std::int64_t miss = 0;
    for (std::int32_t e : exits) {
      if (e < 0)
        ++miss;
      else
        ++hits[e];
    }
    if (censored) *censored = miss;
    return hits;
  }

 private:
  StarDomain domain_;
  BoundaryCloud cloud_;
  SpatialGrid grid_;
  WosConfig config_;
  double rmin_ = 0.0;
  double stop_dist_ = 0.0;
  double graph_factor_ = 1.0;
  double gap_cap_ = 0.0;
};

}  // namespace pklab
