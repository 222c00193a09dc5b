#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sew/spline_math.hpp"

// Residual functors shared by the solver and the finite-difference Jacobian
// tests. Observation timestamps are fixed by the measured data, so each
// functor carries precomputed basis weights; the unknowns are control
// points, inverse depths and biases only.

namespace sew::fusion::detail {

// Storage order of a quaternion parameter block is (x, y, z, w), matching
// Eigen and the solver's quaternion parameterization.
template <typename T>
Eigen::Quaternion<T> quat_block(const T* p) {
  return Eigen::Quaternion<T>(p[3], p[0], p[1], p[2]);
}

// sqrt(gamma) * (measured - omega(t) - bias)
struct GyroResidual {
  Eigen::Vector3d measured;
  double bt[3];   // cumulative basis at the sample's local parameter
  double btd[3];  // its u-derivative
  double dt;      // rotation knot spacing
  double sqrt_w;

  template <typename T>
  bool operator()(const T* q0, const T* q1, const T* q2, const T* q3, const T* bias, T* out) const {
    const T btw[3] = {T(bt[0]), T(bt[1]), T(bt[2])};
    const T btdw[3] = {T(btd[0]), T(btd[1]), T(btd[2])};
    const Eigen::Matrix<T, 3, 1> omega = splines::so3_segment_body_rate<T>(
        quat_block(q0), quat_block(q1), quat_block(q2), quat_block(q3), btw, btdw, T(dt));
    for (int a = 0; a < 3; ++a) {
      out[a] = T(sqrt_w) * (T(measured[a]) - omega[a] - bias[a]);
    }
    return true;
  }
};

// sqrt(gamma) * (measured - (R^T (pddot - g) + bias))
struct AccelResidual {
  Eigen::Vector3d measured;
  Eigen::Vector3d gravity;
  double bt[3];  // rotation cumulative basis
  double b2[4];  // position basis second derivative, already divided by dt^2
  double sqrt_w;

  template <typename T>
  bool operator()(const T* q0, const T* q1, const T* q2, const T* q3, const T* p0, const T* p1, const T* p2,
                  const T* p3, const T* bias, T* out) const {
    const T btw[3] = {T(bt[0]), T(bt[1]), T(bt[2])};
    const Eigen::Quaternion<T> q =
        splines::so3_segment<T>(quat_block(q0), quat_block(q1), quat_block(q2), quat_block(q3), btw);
    const T* const cps[4] = {p0, p1, p2, p3};
    Eigen::Matrix<T, 3, 1> pddot;
    for (int a = 0; a < 3; ++a) {
      pddot[a] = T(0);
      for (int m = 0; m < 4; ++m) pddot[a] += T(b2[m]) * cps[m][a];
    }
    const Eigen::Matrix<T, 3, 1> f = q.conjugate() * (pddot - gravity.cast<T>());
    for (int a = 0; a < 3; ++a) {
      out[a] = T(sqrt_w) * (T(measured[a]) - f[a] - bias[a]);
    }
    return true;
  }
};

// measured - project(R_rel * ray + rho * t_rel), with
//   R_rel = R_obs^T R_ref,  t_rel = R_obs^T (p_ref - p_obs).
// The homogeneous point equals the camera-frame landmark scaled by rho for
// rho > 0 and degrades continuously to the rotated ray at infinity for
// rho = 0; projection is scale invariant, so rho never divides anything.
// Overlapping control-point blocks between the observing and reference
// segments are deduplicated; the slot arrays say where each role lives in
// the packed parameter list.
struct ReprojResidual {
  Eigen::Vector2d measured;
  Eigen::Vector3d ray;  // unit reference ray, camera frame
  double fx, fy, cx, cy;
  double bt_obs[3], bt_ref[3];  // rotation cumulative basis
  double b_obs[4], b_ref[4];    // position value basis
  int rot_obs[4], rot_ref[4];
  int pos_obs[4], pos_ref[4];
  int rho_slot;

  template <typename T>
  Eigen::Quaternion<T> rotation_at(T const* const* params, const int slot[4], const double bt[3]) const {
    const T btw[3] = {T(bt[0]), T(bt[1]), T(bt[2])};
    return splines::so3_segment<T>(quat_block(params[slot[0]]), quat_block(params[slot[1]]),
                                   quat_block(params[slot[2]]), quat_block(params[slot[3]]), btw);
  }

  template <typename T>
  Eigen::Matrix<T, 3, 1> position_at(T const* const* params, const int slot[4], const double b[4]) const {
    Eigen::Matrix<T, 3, 1> p;
    for (int a = 0; a < 3; ++a) {
      p[a] = T(0);
      for (int m = 0; m < 4; ++m) p[a] += T(b[m]) * params[slot[m]][a];
    }
    return p;
  }

  template <typename T>
  bool operator()(T const* const* params, T* out) const {
    const Eigen::Quaternion<T> q_obs = rotation_at(params, rot_obs, bt_obs);
    const Eigen::Quaternion<T> q_ref = rotation_at(params, rot_ref, bt_ref);
    const Eigen::Matrix<T, 3, 1> p_obs = position_at(params, pos_obs, b_obs);
    const Eigen::Matrix<T, 3, 1> p_ref = position_at(params, pos_ref, b_ref);
    const T rho = params[rho_slot][0];

    const Eigen::Quaternion<T> q_rel = q_obs.conjugate() * q_ref;
    const Eigen::Matrix<T, 3, 1> point = q_rel * ray.cast<T>() + rho * (q_obs.conjugate() * (p_ref - p_obs));
    if (point.z() <= T(1e-9)) return false;  // behind the camera: reject the step
    out[0] = T(measured.x()) - (T(fx) * point.x() / point.z() + T(cx));
    out[1] = T(measured.y()) - (T(fy) * point.y() / point.z() + T(cy));
    return true;
  }
};

}  // namespace sew::fusion::detail
