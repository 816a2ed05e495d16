#pragma once

#include <array>
#include <cmath>

namespace pklab {

// Ambient 3-vector. The sampled pipeline lives in R^3 (boundary dimension
// n = 2); the closed-form potential formulas stay dimension-parametric.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline Vec3 operator*(Vec3 a, double s) { return s * a; }
inline Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
inline Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
inline Vec3& operator+=(Vec3& a, Vec3 b) { a = a + b; return a; }
inline Vec3& operator-=(Vec3& a, Vec3 b) { a = a - b; return a; }

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(norm2(a)); }
inline double dist(Vec3 a, Vec3 b) { return norm(a - b); }
inline double dist2(Vec3 a, Vec3 b) { return norm2(a - b); }

inline Vec3 normalized(Vec3 a) {
  double n = norm(a);
  return n > 0.0 ? a / n : Vec3{0.0, 0.0, 0.0};
}

// Two unit vectors completing `n` (assumed unit) to an orthonormal frame.
// Branch on the smallest component to stay well-conditioned.
inline std::array<Vec3, 2> tangent_basis(Vec3 n) {
  Vec3 h = std::abs(n.x) <= std::abs(n.y) && std::abs(n.x) <= std::abs(n.z)
               ? Vec3{1.0, 0.0, 0.0}
               : (std::abs(n.y) <= std::abs(n.z) ? Vec3{0.0, 1.0, 0.0}
                                                 : Vec3{0.0, 0.0, 1.0});
  Vec3 u = normalized(cross(n, h));
  Vec3 v = cross(n, u);
  return {u, v};
}

}  // namespace pklab
