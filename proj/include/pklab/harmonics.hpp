#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pklab/vec.hpp"

namespace pklab {

namespace detail {

// Associated Legendre P_l^m(cos theta) without the Condon-Shortley sign,
// plus the companion ratio P_l^m / sin theta (finite for m >= 1). Both obey
// the same three-term recurrence, seeded one power of sin theta apart.
inline double assoc_legendre(int l, int m, double x, double s) {
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0) * s;
  if (l == m) return pmm;
  double p_prev = pmm;
  double p = (2.0 * m + 1.0) * x * pmm;
  for (int k = m + 2; k <= l; ++k) {
    double next = ((2.0 * k - 1.0) * x * p - (k + m - 1.0) * p_prev) / (k - m);
    p_prev = p;
    p = next;
  }
  return p;
}

inline double assoc_legendre_over_sin(int l, int m, double x, double s) {
  // Seed P_m^m / sin theta = (2m-1)!! sin^(m-1) theta.
  double qmm = 1.0;
  for (int k = 1; k <= m; ++k) qmm *= (2.0 * k - 1.0);
  for (int k = 1; k < m; ++k) qmm *= s;
  if (l == m) return qmm;
  double q_prev = qmm;
  double q = (2.0 * m + 1.0) * x * qmm;
  for (int k = m + 2; k <= l; ++k) {
    double next = ((2.0 * k - 1.0) * x * q - (k + m - 1.0) * q_prev) / (k - m);
    q_prev = q;
    q = next;
  }
  return q;
}

inline double sph_norm(int l, int m) {
  double ratio = 1.0;  // (l-m)! / (l+m)!
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) * ratio);
}

}  // namespace detail

// Real orthonormal spherical harmonic of degree l and order m on S^2
// (m > 0 cosine type, m < 0 sine type). Unit L^2 norm on the sphere.
inline double real_sph_harm(int l, int m, Vec3 w) {
  if (l < 0 || std::abs(m) > l)
    throw std::invalid_argument("real_sph_harm: need 0 <= |m| <= l");
  int am = std::abs(m);
  double x = w.z;
  double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  double p = detail::assoc_legendre(l, am, x, s);
  double nrm = detail::sph_norm(l, am);
  if (m == 0) return nrm * p;
  double cphi = 1.0, sphi = 0.0;
  if (s > 1e-14) {
    cphi = w.x / s;
    sphi = w.y / s;
  }
  double cm = 1.0, sm = 0.0;  // cos(am*phi), sin(am*phi)
  for (int k = 0; k < am; ++k) {
    double c = cm * cphi - sm * sphi;
    sm = sm * cphi + cm * sphi;
    cm = c;
  }
  double amp = std::sqrt(2.0) * nrm * p;
  return m > 0 ? amp * cm : amp * sm;
}

// Value and tangential (surface) gradient in ambient coordinates. The
// gradient formula divides by sin theta only through stable companions, with
// a clamp for the poles (which the node sets in this codebase never hit).
inline void real_sph_harm_grad(int l, int m, Vec3 w, double& value, Vec3& grad) {
  if (l < 0 || std::abs(m) > l)
    throw std::invalid_argument("real_sph_harm_grad: need 0 <= |m| <= l");
  int am = std::abs(m);
  double x = w.z;
  double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  double s_safe = std::max(s, 1e-9);

  double p = detail::assoc_legendre(l, am, x, s);
  double p_low = am > l - 1 ? 0.0 : detail::assoc_legendre(l - 1, am, x, s);
  // d/dtheta P_l^m(cos theta) = (l x P_l^m - (l+m) P_{l-1}^m) / sin theta.
  double dp_dtheta = (l * x * p - (l + am) * p_low) / s_safe;

  double nrm = detail::sph_norm(l, am);
  double cphi = 1.0, sphi = 0.0;
  if (s > 1e-14) {
    cphi = w.x / s;
    sphi = w.y / s;
  }
  double cm = 1.0, sm = 0.0;
  for (int k = 0; k < am; ++k) {
    double c = cm * cphi - sm * sphi;
    sm = sm * cphi + cm * sphi;
    cm = c;
  }

  double az, daz_dtheta, daz_dphi_over_sin;
  if (m == 0) {
    az = nrm * p;
    daz_dtheta = nrm * dp_dtheta;
    daz_dphi_over_sin = 0.0;
  } else {
    double q = detail::assoc_legendre_over_sin(l, am, x, s);
    double amp = std::sqrt(2.0) * nrm;
    if (m > 0) {
      az = amp * p * cm;
      daz_dtheta = amp * dp_dtheta * cm;
      daz_dphi_over_sin = -amp * am * q * sm;
    } else {
      az = amp * p * sm;
      daz_dtheta = amp * dp_dtheta * sm;
      daz_dphi_over_sin = amp * am * q * cm;
    }
  }
  value = az;
  Vec3 e_theta{x * cphi, x * sphi, -s};
  Vec3 e_phi{-sphi, cphi, 0.0};
  grad = daz_dtheta * e_theta + daz_dphi_over_sin * e_phi;
}

}  // namespace pklab
