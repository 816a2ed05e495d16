#pragma once

#include <cmath>
#include <stdexcept>

namespace pklab {

// Volume of the unit ball in R^m, pi^(m/2) / Gamma(m/2 + 1).
inline double unit_ball_volume(int m) {
  if (m < 0) throw std::invalid_argument("unit_ball_volume: m < 0");
  return std::pow(M_PI, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

// Surface measure of the unit sphere S^n in R^(n+1): (n+1) * omega_{n+1}.
inline double unit_sphere_area(int n) {
  if (n < 1) throw std::invalid_argument("unit_sphere_area: n < 1");
  return (n + 1) * unit_ball_volume(n + 1);
}

// Constants for boundary dimension n (ambient R^(n+1)), n >= 2.
struct DimensionConstants {
  int n = 2;
  double omega_n = 0.0;    // volume of the unit ball in R^n
  double omega_np1 = 0.0;  // volume of the unit ball in R^(n+1)
  double sigma_n = 0.0;    // area of the unit sphere S^n

  static DimensionConstants make(int n) {
    if (n < 2) throw std::invalid_argument("DimensionConstants: n < 2");
    DimensionConstants c;
    c.n = n;
    c.omega_n = unit_ball_volume(n);
    c.omega_np1 = unit_ball_volume(n + 1);
    c.sigma_n = unit_sphere_area(n);
    return c;
  }

  // Radius of the ball whose boundary has unit n-measure.
  double unit_measure_radius() const { return std::pow(sigma_n, -1.0 / n); }
};

}  // namespace pklab
