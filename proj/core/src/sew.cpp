#include "sew/sew.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sew/errors.hpp"

namespace sew::weighting {
namespace {

constexpr int kDenominatorHalfWidth = 20;  // tail below 1e-12 for order 3

double sinc(double x) {
  const double px = M_PI * x;
  if (std::abs(px) < 1e-6) return 1.0 - px * px / 6.0;
  return std::sin(px) / px;
}

double bhat_sq(double nu, int power) {
  const double s = sinc(nu);
  double acc = 1.0;
  for (int i = 0; i < power; ++i) acc *= s;
  return acc * acc;
}

}  // namespace

double frequency_response(const FrequencyResponseModel& model, double nu) {
  if (!std::isfinite(nu)) throw std::invalid_argument("frequency_response: non-finite frequency");
  const int p = model.spline_order + 1;
  const double num = bhat_sq(nu, p);
  if (num == 0.0) return 0.0;
  // Center the truncated denominator sum on the nearest integer so the
  // dominant near-zero terms are always inside the window.
  const double m = std::round(nu);
  double den = 0.0;
  for (int k = -kDenominatorHalfWidth; k <= kDenominatorHalfWidth; ++k)
    den += bhat_sq(nu - m + static_cast<double>(k), p);
  return std::clamp(num / den, 0.0, 1.0);
}

double quality(const spectral::ScalarSpectrum& spectrum, double dt, const FrequencyResponseModel& model) {
  if (!(dt > 0.0)) throw std::invalid_argument("quality: dt must be positive");
  const double total = spectral::energy(spectrum);
  if (!(total > 0.0)) throw DegenerateInput("quality: spectrum has no energy");

  double kept = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double m = spectrum.magnitudes[k];
    if (m == 0.0) continue;
    const double h = frequency_response(model, spectrum.bin_frequency(k) * dt);
    kept += h * h * m * m;
  }
  return std::clamp(kept / total, 0.0, 1.0);
}

double brent_root(const std::function<double(double)>& f, double a, double b, double tol) {
  if (!(a < b)) throw std::invalid_argument("brent_root: requires a < b");
  double fa = f(a);
  double fb = f(b);
  if (fa * fb > 0.0) throw BracketError("brent_root: no sign change over [a, b]");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0 || std::abs(fb) <= tol) return b;

    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // Inverse quadratic / secant step.
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

KnotSelection select_knot_spacing(const spectral::ScalarSpectrum& spectrum, double q_hat, double dt_max,
                                  const FrequencyResponseModel& model) {
  if (!(q_hat > 0.0 && q_hat <= 1.0)) throw std::invalid_argument("select_knot_spacing: q_hat must be in (0, 1]");
  const double dt_min = 2.0 / spectrum.sample_rate;
  if (!(dt_max >= dt_min)) throw std::invalid_argument("select_knot_spacing: dt_max below 2 samples");

  if (quality(spectrum, dt_max, model) >= q_hat) return {dt_max, false};

  // Geometric halving until the requested quality is met, yielding a bracket.
  double hi = dt_max;
  double lo = dt_max;
  bool reached = false;
  while (lo > dt_min) {
    hi = lo;
    lo = std::max(lo / 2.0, dt_min);
    if (quality(spectrum, lo, model) >= q_hat) {
      reached = true;
      break;
    }
  }
  if (!reached) return {dt_min, true};

  const auto g = [&](double dt) { return quality(spectrum, dt, model) - q_hat; };
  double dt = brent_root(g, lo, hi, 1e-8);
  dt = std::clamp(dt, dt_min, dt_max);
  return {dt, false};
}

ResidualPrediction predict_residual_variance(const spectral::ScalarSpectrum& spectrum, double dt, double sigma_n,
                                             const FrequencyResponseModel& model) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict_residual_variance: dt must be positive");
  if (!(sigma_n >= 0.0) || !std::isfinite(sigma_n))
    throw std::invalid_argument("predict_residual_variance: sigma_n must be finite and nonnegative");

  const auto n = static_cast<double>(spectrum.size());
  double err = 0.0;
  double response = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double h = frequency_response(model, spectrum.bin_frequency(k) * dt);
    const double m = spectrum.magnitudes[k];
    err += (1.0 - h) * (1.0 - h) * m * m;
    response += h * h;
  }

  ResidualPrediction out;
  out.sigma_e2 = err / n;
  out.sigma_f2 = sigma_n * sigma_n * response / n;
  out.sigma_r2 = out.sigma_e2 + out.sigma_f2;
  if (!(out.sigma_r2 > 0.0))
    throw DegenerateInput("predict_residual_variance: zero residual variance, supply sigma_n > 0");
  out.gamma = 1.0 / out.sigma_r2;
  return out;
}

ResidualWeightPlan weights_from_quality(const spectral::ScalarSpectrum& gyro_spectrum,
                                        const spectral::ScalarSpectrum& accel_spectrum, double q_hat_gyro,
                                        double q_hat_accel, double sigma_n_gyro, double sigma_n_accel,
                                        double dt_max) {
  const FrequencyResponseModel model{3};
  const KnotSelection so3 = select_knot_spacing(gyro_spectrum, q_hat_gyro, dt_max, model);
  const KnotSelection r3 = select_knot_spacing(accel_spectrum, q_hat_accel, dt_max, model);

  ResidualWeightPlan plan;
  plan.dt_so3 = so3.dt;
  plan.dt_r3 = r3.dt;
  plan.saturated_gyro = so3.saturated;
  plan.saturated_accel = r3.saturated;
  plan.requested_quality_gyro = q_hat_gyro;
  plan.requested_quality_accel = q_hat_accel;
  plan.gyro = predict_residual_variance(gyro_spectrum, so3.dt, sigma_n_gyro, model);
  plan.accel = predict_residual_variance(accel_spectrum, r3.dt, sigma_n_accel, model);
  return plan;
}

}  // namespace sew::weighting
