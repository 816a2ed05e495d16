#include "pklab/potential.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "pklab/rng.hpp"

namespace {

using pklab::ball_cap_measure;
using pklab::ball_cap_measure_from;
using pklab::ball_green;
using pklab::ball_green_gradient;
using pklab::ball_poisson_kernel;
using pklab::DimensionConstants;
using pklab::fundamental_solution;
using pklab::fundamental_solution_slope;
using pklab::Vec3;

const DimensionConstants kDims = DimensionConstants::make(2);

TEST(ClosedForms, FundamentalSolution) {
  // n = 2: F(t) = 1 / (4 pi t), slope 1 / (4 pi t^2).
  EXPECT_NEAR(fundamental_solution(kDims, 0.5), 1.0 / (4.0 * M_PI * 0.5),
              1e-15);
  EXPECT_NEAR(fundamental_solution_slope(kDims, 0.5),
              1.0 / (4.0 * M_PI * 0.25), 1e-15);
  double h = 1e-6, t = 0.8;
  double fd = (fundamental_solution(kDims, t - h) -
               fundamental_solution(kDims, t + h)) /
              (2.0 * h);
  EXPECT_NEAR(fd, fundamental_solution_slope(kDims, t), 1e-6);
}

TEST(ClosedForms, CenteredGreen) {
  double R = 1.0;
  for (double rho : {0.2, 0.5, 0.9}) {
    double expect = (1.0 / (4.0 * M_PI)) * (1.0 / rho - 1.0 / R);
    EXPECT_NEAR(ball_green(kDims, R, {0, 0, 0}, {rho, 0, 0}), expect, 1e-14);
    Vec3 g = ball_green_gradient(kDims, R, {0, 0, 0}, {0, 0, rho});
    EXPECT_NEAR(norm(g), 1.0 / (4.0 * M_PI * rho * rho), 1e-12);
    EXPECT_LT(g.z, 0.0);
  }
  // Vanishes on the boundary.
  EXPECT_NEAR(ball_green(kDims, 1.0, {0, 0, 0}, {0, 1, 0}), 0.0, 1e-15);
}

TEST(ClosedForms, OffCenterGreenBoundaryAndSymmetry) {
  double R = 2.0;
  Vec3 p{0.3, -0.5, 0.7};
  pklab::RngStream s(3, 0);
  for (int i = 0; i < 200; ++i) {
    Vec3 q = R * s.unit_vector();
    EXPECT_NEAR(ball_green(kDims, R, p, q), 0.0, 1e-13);
  }
  // Green functions are symmetric in pole and argument.
  Vec3 x{-0.4, 0.8, 0.1};
  EXPECT_NEAR(ball_green(kDims, R, p, x), ball_green(kDims, R, x, p), 1e-13);
  // Positive inside.
  for (int i = 0; i < 200; ++i) {
    Vec3 y = R * 0.999 * s.uniform(0.05, 1.0) * s.unit_vector();
    if (dist(y, p) < 1e-3) continue;
    EXPECT_GT(ball_green(kDims, R, p, y), 0.0);
  }
}

TEST(ClosedForms, OffCenterGradientMatchesFiniteDifferences) {
  double R = 1.5;
  Vec3 p{0.2, 0.4, -0.1};
  pklab::RngStream s(9, 0);
  double h = 1e-6;
  for (int i = 0; i < 40; ++i) {
    Vec3 x = 1.45 * s.uniform(0.3, 1.0) * s.unit_vector();
    if (dist(x, p) < 0.3) continue;
    Vec3 g = ball_green_gradient(kDims, R, p, x);
    for (Vec3 e : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}) {
      double fd = (ball_green(kDims, R, p, x + h * e) -
                   ball_green(kDims, R, p, x - h * e)) /
                  (2.0 * h);
      EXPECT_NEAR(fd, dot(g, e), 1e-6 * std::max(1.0, norm(g)));
    }
  }
}

TEST(ClosedForms, GreenNormalDerivativeIsPoissonKernel) {
  // On the boundary, |grad G| recovers the kernel density.
  double R = 1.2;
  Vec3 p{0.3, 0.0, 0.4};
  pklab::RngStream s(21, 0);
  for (int i = 0; i < 60; ++i) {
    Vec3 q = R * s.unit_vector();
    Vec3 g = ball_green_gradient(kDims, R, p, q);
    EXPECT_NEAR(norm(g), ball_poisson_kernel(kDims, R, p, q),
                1e-11 * ball_poisson_kernel(kDims, R, p, q));
    // Gradient points inward along the radius at the boundary.
    EXPECT_NEAR(dot(pklab::normalized(g), (1.0 / R) * q), -1.0, 1e-9);
  }
}

TEST(ClosedForms, KernelIntegratesToOne) {
  double R = 0.7;
  Vec3 p{0.2, -0.1, 0.3};
  pklab::SphereQuad quad = pklab::sphere_tensor_quad(64, 128);
  double total = 0.0;
  for (std::size_t k = 0; k < quad.dirs.size(); ++k)
    total += quad.weights[k] * R * R *
             ball_poisson_kernel(kDims, R, p, R * quad.dirs[k]);
  EXPECT_NEAR(total, 1.0, 1e-12);
  // Centered pole: kernel is the constant 1 / (sigma_n R^n).
  EXPECT_NEAR(ball_poisson_kernel(kDims, R, {0, 0, 0}, {0, 0, R}),
              1.0 / (kDims.sigma_n * R * R), 1e-15);
}

TEST(ClosedForms, CapMeasureCenteredIsChordSquare) {
  double R = 1.3;
  for (double chord : {0.1, 0.5, 1.0, 2.0 * R}) {
    double exact = chord * chord / (4.0 * R * R);
    EXPECT_NEAR(ball_cap_measure(kDims, R, chord), exact, 1e-15);
    EXPECT_NEAR(ball_cap_measure_from(kDims, R, {0, 0, 0}, {0, 0, 1}, chord),
                exact, 1e-10);
  }
}

// Axis-aligned cap mass on the unit ball from pole a*z, by the exact
// antiderivative of the kernel in the polar variable:
// (1+a)/(2a) - (1-a^2) / (2a sqrt(1 + a^2 - 2ac)) for cap cos(theta) >= c.
double axis_cap_mass(double a, double c) {
  return (1.0 + a) / (2.0 * a) -
         (1.0 - a * a) / (2.0 * a * std::sqrt(1.0 + a * a - 2.0 * a * c));
}

TEST(ClosedForms, CapMeasureFromOffsetPole) {
  double R = 1.0;
  Vec3 p{0, 0, 0.5};
  // Whole sphere gives total mass one from any pole.
  EXPECT_NEAR(ball_cap_measure_from(kDims, R, p, {1, 0, 0}, 2.0, 128, 256),
              1.0, 1e-9);
  // The cap under the pole carries more mass than the antipodal one.
  double near_cap = ball_cap_measure_from(kDims, R, p, {0, 0, 1}, 0.4);
  double far_cap = ball_cap_measure_from(kDims, R, p, {0, 0, -1}, 0.4);
  double centered = ball_cap_measure(kDims, R, 0.4);
  EXPECT_GT(near_cap, 2.0 * far_cap);
  EXPECT_GT(near_cap, centered);
  EXPECT_LT(far_cap, centered);
  // Independent oracle: exact antiderivative along the axis variable.
  double c = 1.0 - 0.4 * 0.4 / 2.0;
  EXPECT_NEAR(near_cap, axis_cap_mass(0.5, c), 1e-9);
  EXPECT_NEAR(far_cap, axis_cap_mass(-0.5, c), 1e-9);
}

TEST(ClosedForms, RejectsBadInput) {
  EXPECT_THROW(fundamental_solution(kDims, 0.0), std::invalid_argument);
  EXPECT_THROW(ball_green(kDims, 1.0, {1.1, 0, 0}, {0, 0, 0}),
               std::invalid_argument);
  EXPECT_THROW(ball_poisson_kernel(kDims, 1.0, {0, 1.0, 0}, {0, 1, 0}),
               std::invalid_argument);
  EXPECT_THROW(ball_cap_measure(kDims, 1.0, 2.5), std::invalid_argument);
}

}  // namespace
