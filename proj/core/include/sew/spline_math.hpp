#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

// Segment-level uniform cubic B-spline math, templated on the scalar type so
// the same expressions serve plain evaluation and automatic differentiation.
// A segment spans local parameter u in [0,1) and is controlled by the four
// control values with indices i-1 .. i+2.

namespace sew::splines {

template <typename T>
void cubic_basis(T u, T b[4]) {
  const T u2 = u * u;
  const T u3 = u2 * u;
  const T w = T(1) - u;
  b[0] = w * w * w / T(6);
  b[1] = (T(3) * u3 - T(6) * u2 + T(4)) / T(6);
  b[2] = (T(-3) * u3 + T(3) * u2 + T(3) * u + T(1)) / T(6);
  b[3] = u3 / T(6);
}

// Derivatives are with respect to u; divide by the knot spacing per order
// to get time derivatives.
template <typename T>
void cubic_basis_d1(T u, T b[4]) {
  const T u2 = u * u;
  const T w = T(1) - u;
  b[0] = -w * w / T(2);
  b[1] = (T(9) * u2 - T(12) * u) / T(6);
  b[2] = (T(-9) * u2 + T(6) * u + T(3)) / T(6);
  b[3] = u2 / T(2);
}

template <typename T>
void cubic_basis_d2(T u, T b[4]) {
  b[0] = T(1) - u;
  b[1] = T(3) * u - T(2);
  b[2] = T(-3) * u + T(1);
  b[3] = u;
}

// Cumulative form: Btilde_j = sum of the classic basis functions from j up,
// so Btilde_1(0) = 5/6 and Btilde_1(1) = 1.
template <typename T>
void cumulative_basis(T u, T b[3]) {
  const T u2 = u * u;
  const T u3 = u2 * u;
  b[0] = (T(5) + T(3) * u - T(3) * u2 + u3) / T(6);
  b[1] = (T(1) + T(3) * u + T(3) * u2 - T(2) * u3) / T(6);
  b[2] = u3 / T(6);
}

template <typename T>
void cumulative_basis_d1(T u, T b[3]) {
  const T u2 = u * u;
  const T w = T(1) - u;
  b[0] = w * w / T(2);
  b[1] = (T(-6) * u2 + T(6) * u + T(3)) / T(6);
  b[2] = u2 / T(2);
}

// exp of a rotation vector as a unit quaternion; Taylor branch keeps the
// expression differentiable through zero.
template <typename T>
Eigen::Quaternion<T> quat_exp(const Eigen::Matrix<T, 3, 1>& v) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T theta2 = v.squaredNorm();
  T w, k;
  if (theta2 > T(1e-14)) {
    const T theta = sqrt(theta2);
    const T half = theta / T(2);
    w = cos(half);
    k = sin(half) / theta;
  } else {
    w = T(1) - theta2 / T(8);
    k = T(0.5) - theta2 / T(48);
  }
  return Eigen::Quaternion<T>(w, k * v.x(), k * v.y(), k * v.z());
}

// log of a unit quaternion as a rotation vector in (-pi, pi]; assumes w >= 0,
// which control-point sign alignment guarantees for relative rotations.
template <typename T>
Eigen::Matrix<T, 3, 1> quat_log(const Eigen::Quaternion<T>& q) {
  using std::atan2;
  using std::sqrt;
  const Eigen::Matrix<T, 3, 1> v(q.x(), q.y(), q.z());
  const T s2 = v.squaredNorm();
  T k;
  if (s2 > T(1e-14)) {
    const T s = sqrt(s2);
    k = T(2) * atan2(s, q.w()) / s;
  } else {
    k = T(2) / q.w() - T(2) * s2 / (T(3) * q.w() * q.w() * q.w());
  }
  return k * v;
}

// R(u) = q0 * exp(Btilde_1 w1) * exp(Btilde_2 w2) * exp(Btilde_3 w3)
// with w_j = log(q_{j-1}^{-1} q_j).
template <typename T>
Eigen::Quaternion<T> so3_segment(const Eigen::Quaternion<T>& q0, const Eigen::Quaternion<T>& q1,
                                 const Eigen::Quaternion<T>& q2, const Eigen::Quaternion<T>& q3,
                                 const T btilde[3]) {
  const Eigen::Matrix<T, 3, 1> w1 = quat_log<T>(q0.conjugate() * q1);
  const Eigen::Matrix<T, 3, 1> w2 = quat_log<T>(q1.conjugate() * q2);
  const Eigen::Matrix<T, 3, 1> w3 = quat_log<T>(q2.conjugate() * q3);
  return q0 * quat_exp<T>(btilde[0] * w1) * quat_exp<T>(btilde[1] * w2) * quat_exp<T>(btilde[2] * w3);
}

// Body-frame angular velocity of the segment:
//   omega = (1/dt) * [ B'_1 (A2 A3)^T w1 + B'_2 A3^T w2 + B'_3 w3 ].
template <typename T>
Eigen::Matrix<T, 3, 1> so3_segment_body_rate(const Eigen::Quaternion<T>& q0, const Eigen::Quaternion<T>& q1,
                                             const Eigen::Quaternion<T>& q2, const Eigen::Quaternion<T>& q3,
                                             const T btilde[3], const T btilde_d1[3], T dt) {
  const Eigen::Matrix<T, 3, 1> w1 = quat_log<T>(q0.conjugate() * q1);
  const Eigen::Matrix<T, 3, 1> w2 = quat_log<T>(q1.conjugate() * q2);
  const Eigen::Matrix<T, 3, 1> w3 = quat_log<T>(q2.conjugate() * q3);
  const Eigen::Quaternion<T> a2 = quat_exp<T>(btilde[1] * w2);
  const Eigen::Quaternion<T> a3 = quat_exp<T>(btilde[2] * w3);
  const Eigen::Quaternion<T> a23 = a2 * a3;
  Eigen::Matrix<T, 3, 1> omega = btilde_d1[0] * (a23.conjugate() * w1);
  omega += btilde_d1[1] * (a3.conjugate() * w2);
  omega += btilde_d1[2] * w3;
  return omega / dt;
}

}  // namespace sew::splines
