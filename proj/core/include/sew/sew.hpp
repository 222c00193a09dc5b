#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sew/spectral.hpp"

namespace sew::weighting {

// Frequency response of a least-squares spline fit of the given order,
// evaluated at normalized frequency nu = f * dt:
//   H(nu) = bhat(nu)^2 / sum_k bhat(nu + k)^2,  bhat(nu) = sinc^{order+1}(nu).
// The denominator sum is truncated at |k| <= 20; for order 3 the tail is
// below 1e-12 of the total.
struct FrequencyResponseModel {
  int spline_order = 3;
};

double frequency_response(const FrequencyResponseModel& model, double nu);

// Fraction of spectral energy a spline fit with knot spacing dt retains:
//   q(dt) = sum_k H(f_k dt)^2 |X_k|^2 / sum_k |X_k|^2.
// Throws DegenerateInput on a zero-energy spectrum.
double quality(const spectral::ScalarSpectrum& spectrum, double dt, const FrequencyResponseModel& model);

// Bracketing root finder (Brent: bisection / secant / inverse quadratic).
// Requires f(a) and f(b) of opposite sign, else throws BracketError.
double brent_root(const std::function<double(double)>& f, double a, double b, double tol);

// Result of choosing a knot spacing from a requested quality. saturated is
// set when q_hat was unreachable and dt fell back to the configured floor.
struct KnotSelection {
  double dt = 0.0;
  bool saturated = false;
};

// Chooses the largest dt <= dt_max with q(dt) >= q_hat: early-exits at
// dt_max, otherwise brackets by geometric halving and polishes with Brent to
// |q(dt) - q_hat| <= 1e-4. Never returns below dt_min = 2 / sample_rate;
// unreachable q_hat saturates there (warning flag, no throw).
KnotSelection select_knot_spacing(const spectral::ScalarSpectrum& spectrum, double q_hat, double dt_max,
                                  const FrequencyResponseModel& model);

// Predicted residual decomposition at a given knot spacing. gamma is the
// modality weight 1 / sigma_r2.
struct ResidualPrediction {
  double sigma_e2 = 0.0;  // approximation error variance
  double sigma_f2 = 0.0;  // retained measurement noise variance
  double sigma_r2 = 0.0;  // total: sigma_e2 + sigma_f2
  double gamma = 0.0;
};

// sigma_e2 = (1/N) sum_k (1 - H(f_k dt))^2 |X_k|^2
// sigma_f2 = (sigma_n^2 / N) sum_k H(f_k dt)^2
// Throws DegenerateInput when sigma_r2 is zero (noise-free and perfectly
// representable: no meaningful weight exists).
ResidualPrediction predict_residual_variance(const spectral::ScalarSpectrum& spectrum, double dt, double sigma_n,
                                             const FrequencyResponseModel& model);

// Knot spacings and weights for both IMU modalities.
struct ResidualWeightPlan {
  double dt_so3 = 0.0;
  double dt_r3 = 0.0;
  ResidualPrediction gyro;
  ResidualPrediction accel;
  double requested_quality_gyro = 0.0;
  double requested_quality_accel = 0.0;
  bool saturated_gyro = false;
  bool saturated_accel = false;
};

// Full per-modality pipeline: select a knot spacing per spectrum, then
// predict the residual variance and weight at that spacing. Noise enters
// the weights only, never the knot selection.
ResidualWeightPlan weights_from_quality(const spectral::ScalarSpectrum& gyro_spectrum,
                                        const spectral::ScalarSpectrum& accel_spectrum, double q_hat_gyro,
                                        double q_hat_accel, double sigma_n_gyro, double sigma_n_accel,
                                        double dt_max);

}  // namespace sew::weighting
