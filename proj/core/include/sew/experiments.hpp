#pragma once

#include <cstdint>
#include <vector>

#include "sew/fusion.hpp"
#include "sew/simulate.hpp"

namespace sew::experiments {

// --- 1-D knot sweep -------------------------------------------------------
//
// Least-squares spline fits of a noisy filtered-noise signal over a range of
// knot spacings, comparing the empirical residual std against the spectral
// prediction. The empirical route (time-domain fit) and the predicted route
// (spectrum + frequency response) are computed independently.

struct Fig2Row {
  double dt = 0.0;
  double sigma_r_empirical = 0.0;  // fit residual vs the noisy signal
  double sigma_r_predicted = 0.0;  // spectral prediction from the same data
  double sigma_n = 0.0;
  double sigma_r0 = 0.0;  // fit residual vs the noise-free signal
};

struct Fig2Config {
  std::uint64_t seed = 80;
  double duration = 10.0;     // seconds
  double sample_rate = 500.0; // Hz
  double sigma_n = 0.1;       // signal units
  double dt_lo = 0.02;
  double dt_hi = 1.0;
  int n_dt = 30;  // log-spaced
};

struct Fig2Summary {
  std::vector<Fig2Row> rows;
  std::size_t argmin_r0 = 0;     // index of the sigma_r0 minimum
  bool interior_minimum = false; // argmin not at either end of the sweep
  double max_rel_error = 0.0;    // |pred - emp|/emp over dt >= dt at argmin_r0
  double noise_underprediction = 0.0;  // emp / sigma_n at the largest dt
};

// The signal spectrum behind the sweep: flat to 0.4 Hz, then f^-2 to
// 3 Hz, then f^-4 out to 12 Hz; total std 1.
sim::BandPlan fig2_band_plan();

Fig2Summary run_fig2(const Fig2Config& config);

// --- Quality tracking ------------------------------------------------------
//
// Full visual-inertial solves over a grid of requested qualities and seeds,
// recording the achieved quality per modality.

struct QualityPoint {
  std::uint64_t seed = 0;
  double q_hat = 0.0;
  double q_out_gyro = 0.0;
  double q_out_accel = 0.0;
  double dt_so3 = 0.0;
  double dt_r3 = 0.0;
};

struct QualitySummary {
  std::vector<QualityPoint> points;
  double worst_gyro_dev = 0.0;    // max |q_out - q_hat|
  double worst_accel_above = 0.0; // max (q_out - q_hat)
  double worst_accel_below = 0.0; // max (q_hat - q_out)
};

QualitySummary run_quality(const std::vector<double>& q_hats,
                           const std::vector<std::uint64_t>& seeds);

// Same sweep on one explicit scenario instead of the seeded preset.
QualitySummary run_quality(const sim::ScenarioConfig& scenario, const std::vector<double>& q_hats);

// --- Weight sweep ----------------------------------------------------------
//
// Same scenario and solver settings, sweeping a common multiplier on both
// IMU weights. Endpoint error is meaningful because the scenario is a
// closed loop: the true trajectory returns to its starting position.

struct WeightPoint {
  double factor = 1.0;
  double epe = 0.0;          // meters
  double scale_error = 0.0;  // |1 - median landmark scale ratio|
  double reprojection_rms = 0.0;
};

struct WeightSummary {
  std::vector<WeightPoint> points;
  double epe_at_unit = 0.0;
  double epe_min = 0.0;
  double epe_at_largest = 0.0;
};

WeightSummary run_weights(std::uint64_t seed, const std::vector<double>& factors);
WeightSummary run_weights(const sim::ScenarioConfig& scenario, const std::vector<double>& factors);

// --- Dropout ladder --------------------------------------------------------
//
// Removes trailing visual observations and measures how far the endpoint of
// the re-estimated trajectory moves relative to the full solution.

struct DropoutPoint {
  double dropout_seconds = 0.0;
  double epd = 0.0;  // endpoint distortion vs the full solution, meters
  double epe = 0.0;
};

struct DropoutSummary {
  std::vector<DropoutPoint> points;  // sorted by dropout duration
  int inversions = 0;                // adjacent decreases of epd
};

DropoutSummary run_dropout(std::uint64_t seed, const std::vector<double>& dropouts);
DropoutSummary run_dropout(const sim::ScenarioConfig& scenario, const std::vector<double>& dropouts);

// --- Scenario presets ------------------------------------------------------

// Split of a sensor-domain spectrum: [f_lo, f_hi) carrying a fraction of the
// total variance, falling off as f^-slope inside the split, divided into
// geometrically spaced sub-bands.
struct SpectralSplit {
  double f_lo = 0.0;
  double f_hi = 0.0;
  double energy_fraction = 0.0;
  double slope = 0.0;
  int sub_bands = 1;
};

// Band plans converted into the trajectory generator's units. Rate plans are
// specified as gyro-domain (rad/s) variance and converted to rotation-vector
// amplitudes; accel plans (m/s^2)^2 convert to position amplitudes.
sim::BandPlan rotation_bands_from_rate_plan(double total_variance,
                                            const std::vector<SpectralSplit>& splits);
sim::BandPlan position_bands_from_accel_plan(double total_variance,
                                             const std::vector<SpectralSplit>& splits);

// Smooth low-frequency motion plus genuine broadband tails; suited to
// residual standardization at the default qualities.
sim::ScenarioConfig handheld_scenario(std::uint64_t seed);

// Faster closed-loop motion for endpoint-error sweeps.
sim::ScenarioConfig bodycam_scenario(std::uint64_t seed);

// Broad declining spectra so every requested quality in [0.9, 0.995] finds
// its knot spacing strictly inside (dt_min, dt_max).
sim::ScenarioConfig quality_scenario(std::uint64_t seed);

// Library-default fusion settings with the noise levels and gravity taken
// from the scenario.
fusion::FusionConfig fusion_config_for(const sim::ScenarioConfig& scenario);

}  // namespace sew::experiments
