#pragma once

// Minimal 3-vector / 3x3 matrix arithmetic templated on the scalar so the
// same kinematics code runs on doubles and on dual numbers.

#include <array>
#include <cmath>

#include <Eigen/Core>

#include "bodyfit/dual.hpp"

namespace bodyfit {

template <class T>
using Vec3 = std::array<T, 3>;

/// Row-major 3x3 matrix.
template <class T>
using Mat3 = std::array<T, 9>;

template <class T>
Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
template <class T>
Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
template <class T, class S>
Vec3<T> scale(const S& s, const Vec3<T>& a) {
  return {a[0] * s, a[1] * s, a[2] * s};
}

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class T>
Vec3<T> mul(const Mat3<T>& m, const Vec3<T>& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

template <class T>
Mat3<T> mul(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out[3 * r + c] = a[3 * r] * b[c] + a[3 * r + 1] * b[3 + c] + a[3 * r + 2] * b[6 + c];
    }
  }
  return out;
}

/// Mixed product: constant matrix times variable vector.
template <class T>
Vec3<T> mul(const Eigen::Matrix3d& m, const Vec3<T>& v) {
  return {v[0] * m(0, 0) + v[1] * m(0, 1) + v[2] * m(0, 2),
          v[0] * m(1, 0) + v[1] * m(1, 1) + v[2] * m(1, 2),
          v[0] * m(2, 0) + v[1] * m(2, 1) + v[2] * m(2, 2)};
}

template <class T>
Vec3<T> lift(const Eigen::Vector3d& v) {
  return {T(v.x()), T(v.y()), T(v.z())};
}

inline Eigen::Vector3d to_eigen(const Vec3<double>& v) { return {v[0], v[1], v[2]}; }

/// Rodrigues' formula: axis-angle (exponential map) to rotation matrix.
/// Uses the series expansion near zero so derivatives stay exact at the
/// identity.
template <class T>
Mat3<T> rodrigues(const T& wx, const T& wy, const T& wz) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T n2 = wx * wx + wy * wy + wz * wz;
  T a, b;
  if (value_of(n2) < 1e-10) {
    a = 1.0 - n2 / 6.0;
    b = 0.5 - n2 / 24.0;
  } else {
    const T n = sqrt(n2);
    a = sin(n) / n;
    b = (1.0 - cos(n)) / n2;
  }
  // R = I + a K + b K^2 with K the cross-product matrix of w.
  const T xx = wx * wx, yy = wy * wy, zz = wz * wz;
  const T xy = wx * wy, xz = wx * wz, yz = wy * wz;
  Mat3<T> r;
  r[0] = 1.0 - b * (yy + zz);
  r[1] = b * xy - a * wz;
  r[2] = b * xz + a * wy;
  r[3] = b * xy + a * wz;
  r[4] = 1.0 - b * (xx + zz);
  r[5] = b * yz - a * wx;
  r[6] = b * xz - a * wy;
  r[7] = b * yz + a * wx;
  r[8] = 1.0 - b * (xx + yy);
  return r;
}

inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const Mat3<double> r = rodrigues(w.x(), w.y(), w.z());
  Eigen::Matrix3d out;
  out << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  return out;
}

/// Inverse of rodrigues(); angle in [0, pi].
Eigen::Vector3d log_rotation(const Eigen::Matrix3d& r);

}  // namespace bodyfit
