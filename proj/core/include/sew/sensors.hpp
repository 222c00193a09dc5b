#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sew/bspline.hpp"
#include "sew/errors.hpp"

namespace sew::sensors {

struct ImuSample {
  double t = 0.0;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // rad/s, body frame
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2, body frame, specific force
};

using ImuLog = std::vector<ImuSample>;

struct ImuBiases {
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2
};

// Pinhole camera with a rolling shutter that scans rows top to bottom over
// the readout time.
struct CameraModel {
  double fx = 0.0, fy = 0.0;  // pixels
  double cx = 0.0, cy = 0.0;  // pixels
  double image_width = 0.0, image_height = 0.0;
  double readout_time = 0.0;  // seconds, < frame_period
  double frame_period = 0.0;  // seconds
};

struct Observation {
  std::int64_t track_id = 0;
  std::int64_t frame_index = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double frame_start_time = 0.0;
};

// Inverse depth is measured along the unit-norm back-projected ray of the
// reference observation; rho = 0 places the landmark at infinity.
struct Landmark {
  std::int64_t track_id = 0;
  Observation reference;
  double inverse_depth = 0.0;
};

struct TrackSet {
  std::vector<Observation> observations;  // grouped by track, frame-ordered
  std::vector<Landmark> landmarks;
  std::vector<std::int64_t> dropped_track_ids;  // never-visible or pruned tracks
};

// Row-dependent capture time: t_m + readout * v / image_height.
// Throws std::invalid_argument when the row is outside [0, image_height].
double observation_time(double frame_start_time, double row, const CameraModel& camera);

// World gravity used throughout unless a scenario overrides it.
inline Eigen::Vector3d default_gravity() { return {0.0, 0.0, -9.81}; }

// Predicted gyro reading: body angular velocity plus bias. imu_to_body is a
// fixed extrinsic rotation, identity in the synthetic pipeline.
Eigen::Vector3d predict_gyro(const splines::Trajectory& trajectory, double t, const ImuBiases& biases,
                             const Eigen::Quaterniond& imu_to_body = Eigen::Quaterniond::Identity());

// Predicted accelerometer reading (specific force): R^T (p_ddot - g) + bias.
// A resting sensor with identity orientation reads (0, 0, +9.81).
Eigen::Vector3d predict_accel(const splines::Trajectory& trajectory, double t, const ImuBiases& biases,
                              const Eigen::Vector3d& gravity,
                              const Eigen::Quaterniond& imu_to_body = Eigen::Quaterniond::Identity());

// Unit-norm camera-frame direction through the pixel.
Eigen::Vector3d backproject_ray(const Eigen::Vector2d& pixel, const CameraModel& camera);

// Pinhole projection of a camera-frame point with z > 0.
// Throws CheiralityError at or behind the optical plane (z <= 1e-9).
Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraModel& camera);

struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  // body to world
  Eigen::Vector3d position = Eigen::Vector3d::Zero();            // world
};

// Reprojects the reference observation of a landmark into the observing
// camera: for rho > 0 the point ray/rho is transformed by the relative pose;
// for rho = 0 only the relative rotation applies (point at infinity).
Eigen::Vector2d reproject(const Observation& reference, double inverse_depth, const Pose& reference_pose,
                          const Pose& observing_pose, const CameraModel& camera);

// Huber cost of a pixel residual: s^2 below the cutoff, 2cs - c^2 above,
// with s the residual norm.
double huber_cost(const Eigen::Vector2d& residual, double cutoff = 2.0);

}  // namespace sew::sensors
