#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sew/bspline.hpp"
#include "sew/sensors.hpp"
#include "sew/sew.hpp"

namespace sew::fusion {

enum class WeightMode {
  kSew,           // knot spacing and weights from spectral prediction
  kInverseNoise,  // fixed knot spacing, weights 1 / sigma_n^2
};

struct FusionConfig {
  double quality_gyro = 0.99;
  double quality_accel = 0.97;
  double sigma_gyro = 0.0;   // rad/s, measurement noise std
  double sigma_accel = 0.0;  // m/s^2
  double dt_max = 0.5;       // seconds
  double huber_c = 2.0;      // pixels

  WeightMode weight_mode = WeightMode::kSew;
  double fixed_dt_so3 = 0.1;  // used by kInverseNoise only
  double fixed_dt_r3 = 0.1;

  double weight_scale_factor = 1.0;  // multiplies both IMU weights
  bool estimate_biases = true;

  // Cold-start inverse depth for every landmark (1/m). Zero means infinity,
  // which biases early iterations toward rotation-only explanations.
  double initial_inverse_depth = 0.2;

  int max_iterations = 120;
  double function_tolerance = 1e-12;
  double gradient_tolerance = 1e-14;

  Eigen::Vector3d gravity = sensors::default_gravity();
};

struct FusionReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::string termination;

  // Statistics of sqrt(weight)-scaled IMU residual components after
  // convergence; near-unit std means the weights were well calibrated.
  double gyro_weighted_mean = 0.0;
  double gyro_weighted_std = 0.0;
  double accel_weighted_mean = 0.0;
  double accel_weighted_std = 0.0;

  // Measured quality: retained fraction of measured signal energy.
  double q_out_gyro = 0.0;
  double q_out_accel = 0.0;

  double reprojection_rms = 0.0;  // pixels, per component
  int n_reprojection = 0;
  int n_imu = 0;
};

struct FusionResult {
  splines::Trajectory trajectory;
  std::vector<sensors::Landmark> landmarks;  // estimated inverse depths
  sensors::ImuBiases biases;
  FusionReport report;
  weighting::ResidualWeightPlan plan;

  // Per-component sqrt(weight)-scaled IMU residuals after convergence, for
  // distribution plots.
  std::vector<double> gyro_weighted_residuals;
  std::vector<double> accel_weighted_residuals;
};

class FusionProblem {
 public:
  FusionProblem();
  ~FusionProblem();
  FusionProblem(FusionProblem&&) noexcept;
  FusionProblem& operator=(FusionProblem&&) noexcept;

  struct Impl;
  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

// Cost of the current problem state under the solver's convention
// (1/2 sum of robustified squared residual norms), split by modality.
struct CostBreakdown {
  double total = 0.0;
  double vision = 0.0;
  double gyro = 0.0;
  double accel = 0.0;
};

CostBreakdown evaluate_cost(const FusionProblem& problem);

// Overwrites the problem state (control points, inverse depths, biases).
// The trajectory must live on the problem's own knot grids; landmarks are
// matched by track id. Used for warm starts and fixed-point tests.
void set_state(FusionProblem& problem, const splines::Trajectory& trajectory,
               const std::vector<sensors::Landmark>& landmarks, const sensors::ImuBiases& biases);

// Computes the weight plan for a log per the configured mode: spectral
// selection and variance prediction for kSew, fixed spacing with
// gamma = 1 / sigma_n^2 for kInverseNoise.
weighting::ResidualWeightPlan make_weight_plan(const sensors::ImuLog& imu, const FusionConfig& config);

// Assembles the joint cost over spline control points, inverse depths and
// biases. Control points start at zero position / identity rotation and
// every landmark at config.initial_inverse_depth. Throws BuildError on empty
// tracks, observations or IMU samples outside spline coverage, or IMU gaps
// over 5 knot intervals.
FusionProblem build_problem(const sensors::TrackSet& tracks, const sensors::ImuLog& imu,
                            const sensors::CameraModel& camera, const weighting::ResidualWeightPlan& plan,
                            const FusionConfig& config);

// Damped least squares to convergence; deterministic for fixed inputs.
// Throws SolverError when the initial cost is not finite.
FusionResult optimize(FusionProblem& problem, const FusionConfig& config);

// Convenience: plan + build + optimize.
FusionResult fuse(const sensors::TrackSet& tracks, const sensors::ImuLog& imu, const sensors::CameraModel& camera,
                  const FusionConfig& config);

// Closed-loop endpoint error ||p(t0) - p(t_end)||.
double endpoint_error(const splines::Trajectory& trajectory, double t0, double t_end);

// |l_true - l_hat| / l_true.
double scale_error(double estimated_length, double true_length);

// ||p_dropout(t_end) - p_full(t_end)||; both runs share their initialization
// so no alignment step is needed.
double endpoint_distortion(const splines::Trajectory& dropout, const splines::Trajectory& full, double t_end);

// Median ratio of estimated to true pairwise landmark distances; the
// estimate triangulates each landmark from its reference ray and inverse
// depth. Landmarks at infinity are skipped.
double landmark_scale_ratio(const std::vector<sensors::Landmark>& landmarks, const splines::Trajectory& trajectory,
                            const sensors::CameraModel& camera, const std::vector<Eigen::Vector3d>& true_points);

}  // namespace sew::fusion
