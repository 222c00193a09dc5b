#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sew/bspline.hpp"
#include "sew/sensors.hpp"
#include "sew/spectral.hpp"

namespace sew::sim {

// Deterministic random source. Normal draws use an explicit Box-Muller so
// generated datasets are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();
  Eigen::Vector3d normal3();

 private:
  std::mt19937_64 engine_;
};

// One band of filtered white noise: flat spectral support on [f_lo, f_hi)
// with total standard deviation `amplitude`.
struct Band {
  double f_lo = 0.0;
  double f_hi = 0.0;
  double amplitude = 0.0;
};

using BandPlan = std::vector<Band>;

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration = 8.0;  // seconds, >= 2

  double imu_rate = 300.0;
  double frame_rate = 30.0;

  sensors::CameraModel camera{600.0, 600.0, 640.0, 540.0, 1280.0, 1080.0, 0.03, 1.0 / 30.0};

  int n_landmarks = 25;
  double landmark_min_distance = 2.0;  // meters
  double landmark_max_distance = 30.0;
  double pixel_noise = 0.5;  // std, pixels
  double outlier_rate = 0.0;
  bool closed_loop = false;

  double sigma_gyro = 0.0;   // rad/s
  double sigma_accel = 0.0;  // m/s^2
  sensors::ImuBiases biases;

  // Ground-truth motion content: rotation bands in radians (per axis),
  // position bands in meters (per axis).
  BandPlan rotation_bands;
  BandPlan position_bands;

  Eigen::Vector3d gravity = sensors::default_gravity();
};

struct GroundTruth {
  splines::Trajectory trajectory;  // dense knots, spacing 4 / imu_rate
  std::vector<Eigen::Vector3d> landmarks;
  sensors::ImuBiases biases;
  double duration = 0.0;
};

// Sum of band-limited white-noise components, assembled in the frequency
// domain; deterministic per seed. Zero mean by construction.
spectral::UniformSignal generate_test_signal(std::uint64_t seed, double duration, double sample_rate,
                                             const BandPlan& plan);

// Smooth random trajectory on dense knots driven by band-filtered noise.
// Control point 1, the first one inside the measurement support, is
// normalized to (identity, zero); the estimator anchors its gauge there.
// closed_loop blends the trailing control points so position and
// orientation at the duration match t = 0 exactly.
GroundTruth generate_trajectory(const ScenarioConfig& config);

// True IMU readings plus bias plus white noise, at imu_rate over [0, duration].
sensors::ImuLog generate_imu(const GroundTruth& truth, const ScenarioConfig& config);

// Rolling-shutter observations: each landmark row is solved to be
// self-consistent with its own capture time, then pixel noise and outliers
// are applied. Tracks with fewer than 2 surviving observations are dropped.
sensors::TrackSet generate_observations(const GroundTruth& truth, const ScenarioConfig& config);

// Removes all observations with frame start time > t_end - dropout_seconds,
// then prunes tracks that lost their reference or fell under 2 observations.
sensors::TrackSet apply_dropout(const sensors::TrackSet& tracks, double dropout_seconds, double t_end);

}  // namespace sew::sim
