#include "pklab/constants.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using pklab::DimensionConstants;
using pklab::unit_ball_volume;
using pklab::unit_sphere_area;

TEST(Constants, LowDimensionalClosedForms) {
  EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-14);
  EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-14);
  EXPECT_NEAR(unit_ball_volume(3), 4.0 * M_PI / 3.0, 1e-14);
  EXPECT_NEAR(unit_ball_volume(4), M_PI * M_PI / 2.0, 1e-14);
  EXPECT_NEAR(unit_sphere_area(2), 4.0 * M_PI, 1e-14);
  EXPECT_NEAR(unit_sphere_area(3), 2.0 * M_PI * M_PI, 1e-13);
}

TEST(Constants, SphereAreaTiesToBallVolume) {
  for (int n = 2; n <= 8; ++n) {
    DimensionConstants c = DimensionConstants::make(n);
    EXPECT_NEAR(c.sigma_n, (n + 1) * c.omega_np1, 1e-12 * c.sigma_n) << "n=" << n;
    EXPECT_NEAR(c.omega_n, unit_ball_volume(n), 0.0) << "n=" << n;
  }
}

TEST(Constants, UnitMeasureRadius) {
  DimensionConstants c = DimensionConstants::make(2);
  double r = c.unit_measure_radius();
  EXPECT_NEAR(r, std::pow(4.0 * M_PI, -0.5), 1e-15);
  // The sphere of this radius has boundary measure exactly 1.
  EXPECT_NEAR(c.sigma_n * r * r, 1.0, 1e-14);
}

TEST(Constants, RejectsBadDimension) {
  EXPECT_THROW(DimensionConstants::make(1), std::invalid_argument);
  EXPECT_THROW(unit_sphere_area(0), std::invalid_argument);
}

}  // namespace
