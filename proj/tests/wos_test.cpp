#include "pklab/wos.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pklab/potential.hpp"

namespace {

using pklab::BoundaryCloud;
using pklab::DimensionConstants;
using pklab::SpatialGrid;
using pklab::StarDomain;
using pklab::Vec3;
using pklab::WosConfig;
using pklab::WosSampler;

const DimensionConstants kDims = DimensionConstants::make(2);

WosSampler make_ball_sampler(int cloud_size = 40000) {
  StarDomain d = StarDomain::ball(1.0);
  return WosSampler(d, d.sample_boundary(cloud_size));
}

double cap_hit_fraction(const WosSampler& sampler,
                        const std::vector<std::int64_t>& counts, Vec3 center,
                        double chord, std::int64_t total) {
  std::int64_t in_cap = 0;
  for (int id : sampler.grid().within_radius(center, chord))
    in_cap += counts[id];
  return double(in_cap) / double(total);
}

TEST(Wos, DeterministicAcrossThreadCounts) {
  WosSampler sampler = make_ball_sampler(5000);
  auto a = sampler.exit_counts({0.2, 0.1, -0.3}, 4000, 77, 1);
  auto b = sampler.exit_counts({0.2, 0.1, -0.3}, 4000, 77, 4);
  EXPECT_EQ(a, b);
  // And reproducible trajectory by trajectory.
  auto exits = sampler.exit_indices({0.2, 0.1, -0.3}, 50, 77, 3);
  for (int i = 0; i < 50; ++i) {
    pklab::RngStream rng(77, std::uint64_t(i));
    EXPECT_EQ(sampler.run_trajectory({0.2, 0.1, -0.3}, rng), exits[i]);
  }
  // A different seed reshuffles the exits.
  auto c = sampler.exit_counts({0.2, 0.1, -0.3}, 4000, 78, 1);
  EXPECT_NE(a, c);
}

TEST(Wos, CenteredBallExitsAreUniform) {
  WosSampler sampler = make_ball_sampler();
  const std::int64_t T = 60000;
  auto counts = sampler.exit_counts({0, 0, 0}, T, 1234, 0);
  std::int64_t total = std::accumulate(counts.begin(), counts.end(),
                                       std::int64_t(0));
  EXPECT_GE(double(total), 0.999 * double(T));

  double snap = sampler.snap_distance();
  for (Vec3 dir : {Vec3{0, 0, 1}, Vec3{1, 0, 0},
                   pklab::normalized(Vec3{-1, 1, 1})}) {
    for (double chord : {0.3, 0.6, 1.0}) {
      double p = pklab::ball_cap_measure(kDims, 1.0, chord);
      double got = cap_hit_fraction(sampler, counts, dir, chord, total);
      double tol = 4.0 * std::sqrt(p * (1.0 - p) / double(T)) +
                   chord * snap / 1.0;
      EXPECT_NEAR(got, p, tol) << "dir " << dir.x << "," << dir.y << ","
                               << dir.z << " chord " << chord;
    }
  }
}

TEST(Wos, OffCenterPoleMatchesKernelQuadrature) {
  WosSampler sampler = make_ball_sampler();
  const std::int64_t T = 60000;
  Vec3 pole{0, 0, 0.4};
  auto counts = sampler.exit_counts(pole, T, 99, 0);
  std::int64_t total = std::accumulate(counts.begin(), counts.end(),
                                       std::int64_t(0));
  double snap = sampler.snap_distance();
  for (Vec3 dir : {Vec3{0, 0, 1}, Vec3{0, 0, -1}, Vec3{1, 0, 0}}) {
    double chord = 0.5;
    double p = pklab::ball_cap_measure_from(kDims, 1.0, pole, dir, chord);
    double got = cap_hit_fraction(sampler, counts, dir, chord, total);
    // Kernel peaks under the pole; scale the membership band accordingly.
    double edge_kernel = 3.0 / (4.0 * M_PI);
    double tol = 4.0 * std::sqrt(p * (1.0 - p) / double(T)) +
                 2.0 * M_PI * chord * 2.0 * snap * edge_kernel;
    EXPECT_NEAR(got, p, tol) << "cap at z = " << dir.z;
  }
}

TEST(Wos, PerturbedDomainConservesMass) {
  StarDomain d = pklab::StarDomain::perturbed_ball(1.0, {{2, 0, 1.0}}, 0.05)
                     .normalized(kDims);
  WosSampler sampler(d, d.sample_boundary(40000));
  const std::int64_t T = 20000;
  std::int64_t censored = -1;
  auto counts = sampler.exit_counts({0, 0, 0}, T, 5, 0, &censored);
  std::int64_t total = std::accumulate(counts.begin(), counts.end(),
                                       std::int64_t(0));
  EXPECT_EQ(total + censored, T);
  EXPECT_LE(double(censored), 1e-3 * double(T));
  // Exits concentrate where the boundary is close: the equatorial belt of
  // an oblate-ish quadrupole sees a higher kernel than the poles.
  double belt = cap_hit_fraction(sampler, counts,
                                 {d.radius({1, 0, 0}), 0, 0}, 0.3, total);
  double polecap = cap_hit_fraction(sampler, counts,
                                    {0, 0, d.radius({0, 0, 1})}, 0.3, total);
  EXPECT_GT(belt, polecap);
}

TEST(Wos, CertifiedDistanceIsALowerBound) {
  StarDomain d = pklab::StarDomain::perturbed_ball(1.0, {{3, 1, 1.0}}, 0.08);
  WosSampler sampler(d, d.sample_boundary(30000));
  // Dense witness cloud: true distance is at most the distance to any
  // boundary point.
  BoundaryCloud witness = d.sample_boundary(200000);
  SpatialGrid wgrid(witness.points.points);
  pklab::RngStream s(41, 0);
  for (int i = 0; i < 2000; ++i) {
    Vec3 w = s.unit_vector();
    Vec3 x = s.uniform(0.0, 0.95) * d.radius(w) * w;
    double certified = sampler.certified_distance(x);
    EXPECT_LE(certified, wgrid.nearest(x).distance + 1e-12);
  }
  // Deep inside, the radial bound alone is active and exact for the ball.
  WosSampler ball = make_ball_sampler(1000);
  EXPECT_DOUBLE_EQ(ball.certified_distance({0, 0, 0}),
                   ball.domain().min_radius_bound());
}

TEST(Wos, GuardsMisuse) {
  WosSampler sampler = make_ball_sampler(1000);
  EXPECT_THROW(sampler.exit_indices({1.5, 0, 0}, 10, 1),
               std::invalid_argument);
  EXPECT_THROW(sampler.exit_indices({0, 0, 0}, 0, 1), std::invalid_argument);

  WosConfig tight;
  tight.max_steps = 1;
  StarDomain d = StarDomain::ball(1.0);
  WosSampler doomed(d, d.sample_boundary(1000), tight);
  EXPECT_THROW(doomed.exit_indices({0, 0, 0}, 500, 7),
               std::runtime_error);
}

}  // namespace
