#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sew/errors.hpp"
#include "sew/spectral.hpp"

namespace sew::splines {

// Uniform cubic B-spline over R^D. With K control points the valid
// evaluation interval is [t0 + dt, t0 + (K-2) dt): every t inside it has
// full four-point support.
template <int D>
class Spline {
 public:
  using Vec = Eigen::Matrix<double, D, 1>;

  Spline() = default;
  Spline(double knot_spacing, double t0, std::vector<Vec> control_points);

  double knot_spacing() const { return dt_; }
  double t0() const { return t0_; }
  const std::vector<Vec>& control_points() const { return cps_; }
  std::vector<Vec>& control_points() { return cps_; }

  double valid_begin() const { return t0_ + dt_; }
  double valid_end() const { return t0_ + (static_cast<double>(cps_.size()) - 2.0) * dt_; }
  bool contains(double t) const { return t >= valid_begin() && t < valid_end(); }

  // derivative_order 0, 1 or 2; throws std::domain_error outside the valid
  // interval (no extrapolation).
  Vec eval(double t, int derivative_order = 0) const;

  // Segment index and local parameter for a valid t; segment i uses control
  // points i-1 .. i+2.
  void locate(double t, int& segment, double& u) const;

 private:
  double dt_ = 0.0;
  double t0_ = 0.0;
  std::vector<Vec> cps_;
};

using Spline1d = Spline<1>;
using Spline3d = Spline<3>;

// Uniform cubic B-spline on rotations in cumulative form. Control rotations
// are stored as unit quaternions with sign continuity (consecutive dot
// products >= 0) so relative-rotation logs stay on the short arc.
class SplineSO3 {
 public:
  SplineSO3() = default;
  SplineSO3(double knot_spacing, double t0, std::vector<Eigen::Quaterniond> control_rotations);

  double knot_spacing() const { return dt_; }
  double t0() const { return t0_; }
  const std::vector<Eigen::Quaterniond>& control_rotations() const { return cps_; }
  std::vector<Eigen::Quaterniond>& control_rotations() { return cps_; }

  double valid_begin() const { return t0_ + dt_; }
  double valid_end() const { return t0_ + (static_cast<double>(cps_.size()) - 2.0) * dt_; }
  bool contains(double t) const { return t >= valid_begin() && t < valid_end(); }

  Eigen::Quaterniond eval_quat(double t) const;
  Eigen::Matrix3d eval(double t) const;
  // Body-frame angular velocity, rad/s.
  Eigen::Vector3d angular_velocity(double t) const;

  void locate(double t, int& segment, double& u) const;

  // Renormalizes and applies sign continuity; called by the constructor and
  // after external writes to the control points.
  void normalize_controls();

 private:
  double dt_ = 0.0;
  double t0_ = 0.0;
  std::vector<Eigen::Quaterniond> cps_;
};

// Split-interpolation trajectory: orientation and position splines with
// independent knot spacings.
struct Trajectory {
  SplineSO3 rotation;
  Spline3d position;

  double valid_begin() const { return std::max(rotation.valid_begin(), position.valid_begin()); }
  double valid_end() const { return std::min(rotation.valid_end(), position.valid_end()); }
  bool contains(double t) const { return t >= valid_begin() && t < valid_end(); }
};

// Least-squares fit of a 1-d spline to a uniformly sampled signal.
// The knot grid starts one spacing before the first sample so the first
// sample sits at the start of the valid interval. Throws FitError when a
// knot interval contains no samples; std::invalid_argument when the signal
// spans fewer than 4 knot intervals.
Spline1d fit_least_squares_1d(const spectral::UniformSignal& signal, double knot_spacing);

}  // namespace sew::splines
