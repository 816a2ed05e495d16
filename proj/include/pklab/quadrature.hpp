#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pklab/vec.hpp"

namespace pklab {

// i-th node of the golden-spiral set of the given size. Generating nodes on
// demand lets callers filter huge sets without materializing them.
inline Vec3 fibonacci_direction(int index, int count) {
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  double z = -1.0 + (2.0 * index + 1.0) / count;
  double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  double phi = golden_angle * index;
  return {s * std::cos(phi), s * std::sin(phi), z};
}

// Golden-spiral node set on S^2: near-uniform, equal-weight, avoids the
// poles by the half-step offset in z.
inline std::vector<Vec3> fibonacci_sphere(int count) {
  if (count <= 0) throw std::invalid_argument("fibonacci_sphere: count <= 0");
  std::vector<Vec3> dirs;
  dirs.reserve(count);
  for (int i = 0; i < count; ++i) dirs.push_back(fibonacci_direction(i, count));
  return dirs;
}

struct Quad1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1] by Newton iteration on the Legendre
// polynomial; exact for polynomials of degree 2n - 1.
inline Quad1D gauss_legendre(int n) {
  if (n <= 0) throw std::invalid_argument("gauss_legendre: n <= 0");
  Quad1D q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  return q;
}

struct SphereQuad {
  std::vector<Vec3> dirs;
  std::vector<double> weights;  // sum to 4*pi
};

// Tensor rule on S^2: Gauss-Legendre in cos(theta) times a uniform periodic
// rule in phi. Spectrally accurate for smooth integrands; used as the
// refinement reference against equal-weight spiral sets.
inline SphereQuad sphere_tensor_quad(int n_theta, int n_phi) {
  if (n_phi <= 0) throw std::invalid_argument("sphere_tensor_quad: n_phi <= 0");
  Quad1D gl = gauss_legendre(n_theta);
  SphereQuad q;
  q.dirs.reserve(std::size_t(n_theta) * n_phi);
  q.weights.reserve(std::size_t(n_theta) * n_phi);
  double dphi = 2.0 * M_PI / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    double z = gl.nodes[i];
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_phi; ++j) {
      double phi = dphi * (j + 0.5);
      q.dirs.push_back({s * std::cos(phi), s * std::sin(phi), z});
      q.weights.push_back(gl.weights[i] * dphi);
    }
  }
  return q;
}

}  // namespace pklab
