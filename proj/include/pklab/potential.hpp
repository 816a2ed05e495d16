#pragma once

#include <cmath>
#include <stdexcept>

#include "pklab/constants.hpp"
#include "pklab/quadrature.hpp"
#include "pklab/vec.hpp"

namespace pklab {

// Radial profile of the fundamental solution in R^(n+1):
// F(t) = t^(1-n) / ((n-1) sigma_n), harmonic away from 0 with unit flux.
inline double fundamental_solution(const DimensionConstants& dims, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("fundamental_solution: t <= 0");
  return std::pow(t, 1.0 - dims.n) / ((dims.n - 1) * dims.sigma_n);
}

// Magnitude of its gradient, 1 / (sigma_n t^n).
inline double fundamental_solution_slope(const DimensionConstants& dims,
                                         double t) {
  if (!(t > 0.0))
    throw std::invalid_argument("fundamental_solution_slope: t <= 0");
  return 1.0 / (dims.sigma_n * std::pow(t, double(dims.n)));
}

// Green function of the ball B(0, R) with pole p, by the reflection
// construction: G(x) = F(|x - p|) - F((|p|/R) |x - p*|) with p* the
// inversion of p across the sphere. Zero on the boundary, F-singular at p.
inline double ball_green(const DimensionConstants& dims, double R, Vec3 p,
                         Vec3 x) {
  double c = 1.0 / ((dims.n - 1) * dims.sigma_n);
  double rp = norm(p);
  if (rp >= R) throw std::invalid_argument("ball_green: pole outside ball");
  double direct = std::pow(dist(x, p), 1.0 - dims.n);
  double image;
  if (rp < 1e-14 * R) {
    image = std::pow(R, 1.0 - dims.n);
  } else {
    Vec3 pstar = (R * R / (rp * rp)) * p;
    image = std::pow(rp / R * dist(x, pstar), 1.0 - dims.n);
  }
  return c * (direct - image);
}

inline Vec3 ball_green_gradient(const DimensionConstants& dims, double R,
                                Vec3 p, Vec3 x) {
  double rp = norm(p);
  if (rp >= R)
    throw std::invalid_argument("ball_green_gradient: pole outside ball");
  Vec3 d = x - p;
  Vec3 grad = (-1.0 / (dims.sigma_n * std::pow(norm(d), dims.n + 1.0))) * d;
  if (rp >= 1e-14 * R) {
    Vec3 pstar = (R * R / (rp * rp)) * p;
    Vec3 di = x - pstar;
    double f = std::pow(rp / R, 1.0 - dims.n);
    grad += (f / (dims.sigma_n * std::pow(norm(di), dims.n + 1.0))) * di;
  }
  return grad;
}

// Poisson kernel of B(0, R): density of harmonic measure seen from p at the
// boundary point q, (R^2 - |p|^2) / (sigma_n R |p - q|^(n+1)).
inline double ball_poisson_kernel(const DimensionConstants& dims, double R,
                                  Vec3 p, Vec3 q) {
  double rp2 = norm2(p);
  if (rp2 >= R * R)
    throw std::invalid_argument("ball_poisson_kernel: pole outside ball");
  return (R * R - rp2) /
         (dims.sigma_n * R * std::pow(dist(p, q), dims.n + 1.0));
}

// Harmonic measure, seen from the center, of a boundary cap of chord radius
// `chord`: the cap area is exactly pi chord^2 (n = 2), kernel 1/(4 pi R^2).
inline double ball_cap_measure(const DimensionConstants& dims, double R,
                               double chord) {
  if (dims.n != 2)
    throw std::invalid_argument("ball_cap_measure: closed form is for n = 2");
  if (!(chord >= 0.0 && chord <= 2.0 * R))
    throw std::invalid_argument("ball_cap_measure: chord outside [0, 2R]");
  return chord * chord / (4.0 * R * R);
}

// Harmonic measure of a boundary cap seen from an arbitrary pole, by
// quadrature of the Poisson kernel over the cap. Reference-grade: tensor
// Gauss rule in the cap frame.
inline double ball_cap_measure_from(const DimensionConstants& dims, double R,
                                    Vec3 p, Vec3 cap_dir, double chord,
                                    int n_theta = 96, int n_phi = 192) {
  if (dims.n != 2)
    throw std::invalid_argument("ball_cap_measure_from: n = 2 only");
  if (!(chord > 0.0 && chord <= 2.0 * R))
    throw std::invalid_argument("ball_cap_measure_from: bad chord");
  Vec3 axis = normalized(cap_dir);
  auto [e1, e2] = tangent_basis(axis);
  double cos_geo = 1.0 - chord * chord / (2.0 * R * R);
  Quad1D gl = gauss_legendre(n_theta);
  double total = 0.0;
  double half = 0.5 * (1.0 - cos_geo);
  double mid = 0.5 * (1.0 + cos_geo);
  double dphi = 2.0 * M_PI / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    double u = mid + half * gl.nodes[i];
    double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    for (int j = 0; j < n_phi; ++j) {
      double phi = dphi * (j + 0.5);
      Vec3 q = R * (u * axis + s * (std::cos(phi) * e1 + std::sin(phi) * e2));
      total += half * gl.weights[i] * dphi * R * R *
               ball_poisson_kernel(dims, R, p, q);
    }
  }
  return total;
}

}  // namespace pklab
