#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace blocktet {

/// Lattice index (i, j, k) in units of h = 2^-level.
using Idx3 = std::array<int, 3>;

constexpr Idx3 operator+(Idx3 a, Idx3 b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
constexpr Idx3 operator-(Idx3 a, Idx3 b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
constexpr int idx_sum(Idx3 a) { return a[0] + a[1] + a[2]; }

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

/// Row-major 3x3 matrix; just enough for affine cell maps.
struct Mat3 {
  std::array<double, 9> a{};

  double& operator()(int r, int c) { return a[3 * r + c]; }
  double operator()(int r, int c) const { return a[3 * r + c]; }

  Vec3 operator*(Vec3 v) const {
    return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
            a[3] * v.x + a[4] * v.y + a[5] * v.z,
            a[6] * v.x + a[7] * v.y + a[8] * v.z};
  }

  double det() const {
    return a[0] * (a[4] * a[8] - a[5] * a[7]) -
           a[1] * (a[3] * a[8] - a[5] * a[6]) +
           a[2] * (a[3] * a[7] - a[4] * a[6]);
  }

  Mat3 inverse() const {
    const double d = det();
    Mat3 inv;
    inv.a = {(a[4] * a[8] - a[5] * a[7]) / d, (a[2] * a[7] - a[1] * a[8]) / d,
             (a[1] * a[5] - a[2] * a[4]) / d, (a[5] * a[6] - a[3] * a[8]) / d,
             (a[0] * a[8] - a[2] * a[6]) / d, (a[2] * a[3] - a[0] * a[5]) / d,
             (a[3] * a[7] - a[4] * a[6]) / d, (a[1] * a[6] - a[0] * a[7]) / d,
             (a[0] * a[4] - a[1] * a[3]) / d};
    return inv;
  }
};

/// Matrix whose columns are the given vectors.
inline Mat3 from_columns(Vec3 c0, Vec3 c1, Vec3 c2) {
  Mat3 m;
  m.a = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
  return m;
}

}  // namespace blocktet
