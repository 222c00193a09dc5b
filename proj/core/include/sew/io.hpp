#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sew/experiments.hpp"
#include "sew/fusion.hpp"
#include "sew/sensors.hpp"
#include "sew/simulate.hpp"

namespace sew::io {

// Thrown on malformed external input; line is 1-based, 0 when not line-bound.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, long line) : std::runtime_error(what), line(line) {}
  long line;
};

// IMU log CSV with the exact header `t,gx,gy,gz,ax,ay,az`; time must be
// strictly increasing and every row must carry exactly 7 numeric fields.
sensors::ImuLog load_imu_csv(const std::string& path);
void save_imu_csv(const std::string& path, const sensors::ImuLog& log);

// Track CSV with the exact header `track_id,frame,u,v,frame_time`. Rows must
// be grouped by track and frame-ordered within each track; the first row of
// a track becomes the landmark's reference observation. Pixels are validated
// against the camera's image bounds.
sensors::TrackSet load_tracks_csv(const std::string& path, const sensors::CameraModel& camera);
void save_tracks_csv(const std::string& path, const sensors::TrackSet& tracks);

// Scenario and fusion configuration as JSON documents. Keys are optional and
// default to the in-code values; unknown keys are rejected so typos cannot
// silently fall back to defaults. Schemas are documented in the README.
sim::ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const std::string& path, const sim::ScenarioConfig& config);
fusion::FusionConfig load_fusion_config(const std::string& path);
void save_fusion_config(const std::string& path, const fusion::FusionConfig& config);

// Standalone camera document with the same keys as the scenario's camera
// block. Values are not range-checked here; consumers validate what they need.
sensors::CameraModel load_camera(const std::string& path);
void save_camera(const std::string& path, const sensors::CameraModel& camera);

// Analysis document: selected spacings, variances and weights per modality.
struct AnalysisOutput {
  double requested_quality_gyro = 0.0;
  double requested_quality_accel = 0.0;
  double dt_so3 = 0.0;
  double dt_r3 = 0.0;
  weighting::ResidualPrediction gyro;
  weighting::ResidualPrediction accel;
  bool saturated_gyro = false;
  bool saturated_accel = false;
  std::size_t spectrum_size = 0;
  double sample_rate = 0.0;
  double energy_gyro = 0.0;   // mean per-axis signal energy entering selection
  double energy_accel = 0.0;
  std::vector<std::string> warnings;
};

void save_analysis(const std::string& path, const AnalysisOutput& analysis);
AnalysisOutput load_analysis(const std::string& path);

// Experiment emission: one CSV per curve plus a JSON summary carrying the
// headline statistics. Column headers are documented in the README.
void save_fig2(const std::string& out_dir, const experiments::Fig2Summary& summary);
void save_quality(const std::string& out_dir, const experiments::QualitySummary& summary);
void save_weights(const std::string& out_dir, const experiments::WeightSummary& summary);
void save_dropout(const std::string& out_dir, const experiments::DropoutSummary& summary);

// Estimated trajectory sampled at a fixed rate over its valid interval.
// Header: `t,px,py,pz,qw,qx,qy,qz`.
void save_trajectory_csv(const std::string& path, const splines::Trajectory& trajectory, double rate);

struct FusionMetrics {
  fusion::FusionReport report;
  double epe = -1.0;  // negative when not applicable
  double epd = -1.0;
  double scale_error = -1.0;
  double dt_so3 = 0.0;
  double dt_r3 = 0.0;
  double gamma_gyro = 0.0;
  double gamma_accel = 0.0;
};

void save_metrics(const std::string& path, const FusionMetrics& metrics);

// Weighted IMU residual distribution after convergence, 0.25-wide bins over
// [-5, 5] with out-of-range values folded into the edge bins.
// Header: `modality,bin_lo,bin_hi,count`.
void save_residual_histogram(const std::string& path, const std::vector<double>& gyro_weighted,
                             const std::vector<double>& accel_weighted);

}  // namespace sew::io
